# cosserat_dem/cases/__init__.py

import config
from errors import CaseError

from .base_case import BaseCase, CaseSpec
from .beam_flexion import BeamFlexionCase
from .boundary_layer import BoundaryLayerCase
from .lamb import LambCase
from .patch_tests import PatchTestCase
from .plate_hole import PlateHoleCase

CASE_MAP = {
    "patch1": PatchTestCase,
    "patch2": PatchTestCase,
    "patch3": PatchTestCase,
    "boundary_layer": BoundaryLayerCase,
    "plate_hole": PlateHoleCase,
    "beam_flexion": BeamFlexionCase,
    "lamb_desk": LambCase,
}


def get_case_class(case_name: str):
    case_class = CASE_MAP.get(case_name)
    if case_class is None:
        raise CaseError(f"Case '{case_name}' not found in CASE_MAP. Available: {sorted(CASE_MAP)}.")
    return case_class


def make_case(case_name: str, common_params: dict | None = None, overrides: dict | None = None) -> BaseCase:
    params = dict(config.CASE_SPECIFIC_PARAMS.get(case_name, {}))
    params.update(overrides or {})
    return get_case_class(case_name)(params, common_params)


def builtin_cases(common_params: dict | None = None) -> dict:
    """Every registered case, built with its config.CASE_SPECIFIC_PARAMS entry."""
    return {name: make_case(name, common_params) for name in CASE_MAP}
