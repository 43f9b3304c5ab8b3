# cosserat_dem/cases/base_case.py
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable

from errors import CaseError
from system import BodyLoads

MODES = ("static", "dynamic")


@dataclass
class CaseSpec:
    """
    Everything needed to run one simulation.

    mesh_source is one of
        {"generator": "rect", "lx", "ly", "nx", "ny", "origin", "jitter", "seed"}
        {"generator": "box", "lx", "ly", "lz", "nx", "ny", "nz", "origin", "jitter", "seed"}
        {"file": path, "format": optional}
    expected maps a stress component name (sigma_xy, mu_x, ...) to a constant
    or to a callable of the cell barycenters.
    """
    name: str
    mesh_source: dict
    material: object
    bcs: dict = field(default_factory=dict)  # tag -> BoundaryCondition
    body: BodyLoads = field(default_factory=BodyLoads)
    mode: str = "static"
    t_end: float | None = None
    dt: float | None = None
    initial: Callable | None = None  # x -> (u, phi) at t = t0
    initial_velocity: Callable | None = None
    probes: list = field(default_factory=list)
    expected: dict = field(default_factory=dict)
    exact: Callable | None = None  # x -> (u, phi)
    include_penalty: bool = True
    store_every: int = 1
    metadata: dict = field(default_factory=dict)

    @property
    def dirichlet_tags(self) -> set:
        return {tag for tag, bc in self.bcs.items() if bc.is_dirichlet}

    def validate(self, mesh=None) -> None:
        if self.mode not in MODES:
            raise CaseError(f"Case {self.name}: unknown mode '{self.mode}'. Expected one of {MODES}.")
        for tag, bc in self.bcs.items():
            if bc.tag != tag:
                raise CaseError(f"Case {self.name}: boundary condition keyed '{tag}' carries tag '{bc.tag}'.")
        if self.mode == "dynamic":
            if self.t_end is None or self.t_end <= 0:
                raise CaseError(f"Case {self.name}: dynamic mode requires a positive end time T.")
            if getattr(self.material, "rho", 0) <= 0 or getattr(self.material, "I", -1) < 0:
                raise CaseError(f"Case {self.name}: dynamic mode requires rho > 0 and I >= 0.")
        if mesh is not None:
            missing = sorted(mesh.tags - set(self.bcs))
            if missing:
                raise CaseError(f"Case {self.name}: no boundary condition for tags {missing}.")


class BaseCase(ABC):
    """
    Abstract base class for builtin validation cases.
    """
    name = "base"
    description = ""

    def __init__(self, case_params: dict, common_params: dict | None = None):
        """
        Args:
            case_params (dict): Parameters of this case (config.CASE_SPECIFIC_PARAMS entry).
            common_params (dict): Run options shared by every case (refine, dt, ...).
        """
        self.params = dict(case_params)
        self.common_params = common_params or {}
        self.refine = int(self.common_params.get("refine", 1))
        if self.refine < 1:
            raise CaseError(f"Case {self.name}: refine must be >= 1, got {self.refine}.")

    @abstractmethod
    def build_spec(self, overrides: dict | None = None) -> CaseSpec:
        """
        Builds the CaseSpec, with sweep overrides applied on top of self.params.
        """

    def sweep(self) -> list:
        """Parameter overrides for each run of a sweep; empty for a single run."""
        return []

    def postprocess(self, result, session_path: str | None = None) -> dict:
        """Case-specific metrics added to the report."""
        return {}

    def checks(self, report) -> dict:
        """Named pass/fail acceptance checks on a finished report."""
        return {}

    def sweep_checks(self, table) -> dict:
        """Checks spanning all entries of a sweep (table has one row per entry)."""
        return {}

    def _p(self, overrides: dict | None, key: str, default=None):
        if overrides and key in overrides:
            return overrides[key]
        return self.params.get(key, default)
