# cosserat_dem/cases/plate_hole.py
"""
Quarter of a square plate with a circular hole at the origin, loaded by a
uniform traction Sigma e_2 on the top edge. Symmetry lines x_1 = 0 and
x_2 = 0 carry u.n = 0 and phi = 0; the right edge and the hole are free.
"""
import logging
import os

import numpy as np

from errors import CaseError
from material import CosseratMaterial2D
from plotting_utils import plot_hoop_stress
from reconstruction import p1_trace_operator
from system import BoundaryCondition
from .base_case import BaseCase, CaseSpec

logger = logging.getLogger(__name__)

HOLE_TAG = "hole"


def hole_facets(mesh, hole_tag: str = HOLE_TAG) -> np.ndarray:
    facets = mesh.facets_with_tag(hole_tag)
    if len(facets) == 0:
        raise CaseError(f"Mesh has no facet tagged '{hole_tag}'.")
    return facets


def hoop_stress(mesh, ops, sigma: np.ndarray, hole_tag: str = HOLE_TAG,
                center=(0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """
    t.sigma.t at the hole facet centers, t the facet tangent.

    sigma is carried from the adjacent cell to the facet center by the cell's
    P1 reconstruction. Returns (polar angle about center, hoop stress).
    """
    facets = hole_facets(mesh, hole_tag)
    points = mesh.facet_centers[facets]
    trace = p1_trace_operator(mesh, ops, mesh.facet_cells[facets, 0], points)
    at_facets = (trace @ sigma.reshape(mesh.n_cells, -1)).reshape(len(facets), 2, 2)
    n = mesh.facet_normals[facets]
    t = np.column_stack([-n[:, 1], n[:, 0]])
    hoop = np.einsum("fi,fij,fj->f", t, at_facets, t)
    rel = points - np.asarray(center, dtype=float)
    return np.arctan2(rel[:, 1], rel[:, 0]), hoop


def stress_concentration(mesh, ops, sigma: np.ndarray, load: float, hole_tag: str = HOLE_TAG) -> float:
    """Largest hoop stress on the hole, divided by the applied traction."""
    if load == 0.0:
        raise CaseError("Applied traction must be non-zero to normalise the stress concentration.")
    _, hoop = hoop_stress(mesh, ops, sigma, hole_tag)
    return float(hoop.max() / load)


class PlateHoleCase(BaseCase):
    name = "plate_hole"
    description = "Stress concentration around a hole in a Cosserat plate (shipped JSON meshes)."

    def _test(self, overrides: dict | None) -> dict:
        test = int(self._p(overrides, "TEST", 1))
        sweeps = self.params.get("SWEEPS", {})
        if test not in sweeps:
            raise CaseError(f"Case {self.name}: unknown sweep test {test}. Available: {sorted(sweeps)}.")
        return sweeps[test]

    def sweep(self) -> list:
        table = self._test(None)
        a_values, ratios, expected = table["A"], table["R_OVER_ELL"], table["EXPECTED"]
        if len(a_values) > 1:
            pairs = [(a, ratios[0]) for a in a_values]
        else:
            pairs = [(a_values[0], r) for r in ratios]
        if len(pairs) != len(expected):
            raise CaseError(f"Case {self.name}: sweep has {len(pairs)} entries but {len(expected)} expected values.")
        return [{"RADIUS": table["RADIUS"], "A": a, "R_OVER_ELL": r, "EXPECTED": e}
                for (a, r), e in zip(pairs, expected)]

    def _level(self, overrides: dict | None) -> str:
        level = self._p(overrides, "MESH_LEVEL", "fine")
        if level not in ("fine", "ci"):
            raise CaseError(f"Case {self.name}: unknown mesh level '{level}'. Expected 'fine' or 'ci'.")
        return level

    def _mesh_file(self, radius: float, overrides: dict | None) -> str:
        path = self._p(overrides, "MESH_FILE")
        if path is None:
            files = self.params.get("MESH_FILES", {})
            matches = [p for r, p in files.items() if abs(r - radius) <= 1e-9 * max(radius, 1e-30) + 1e-12]
            if not matches:
                raise CaseError(f"Case {self.name}: no mesh file configured for radius {radius}.")
            path = matches[0][self._level(overrides)]
        if not os.path.exists(path):
            raise CaseError(f"Case {self.name}: mesh file {path} not found; write it with make_plate_meshes.py.")
        return path

    def build_spec(self, overrides: dict | None = None) -> CaseSpec:
        first = self.sweep()[0]
        p = lambda key, default=None: self._p(overrides, key, first.get(key, default))  # noqa: E731
        radius = float(p("RADIUS"))
        ratio = float(p("R_OVER_ELL"))
        load = float(p("SIGMA", 1.0))
        mat = CosseratMaterial2D(G=float(p("G", 1.0e3)), nu=float(p("NU", 0.3)), a=float(p("A")),
                                 ell=radius / ratio)
        bcs = {
            "left": BoundaryCondition("left", "dirichlet", constrain="normal"),
            "bottom": BoundaryCondition("bottom", "dirichlet", constrain="normal"),
            "top": BoundaryCondition("top", "neumann", traction=lambda x, t: np.array([0.0, load])),
            "right": BoundaryCondition("right", "neumann"),
            HOLE_TAG: BoundaryCondition(HOLE_TAG, "neumann"),
        }
        name = f"{self.name}_a{mat.a:g}_r{ratio:g}"
        return CaseSpec(name=name, mesh_source={"file": self._mesh_file(radius, overrides)}, material=mat,
                        bcs=bcs, metadata={"radius": radius, "r_over_ell": ratio, "a": mat.a, "sigma": load,
                                           "expected_concentration": p("EXPECTED"),
                                           "mesh_level": self._level(overrides)})

    def postprocess(self, result, session_path: str | None = None) -> dict:
        meta = result.spec.metadata
        scf = stress_concentration(result.mesh, result.ops, result.stresses.sigma, meta["sigma"])
        metrics = {"a": meta["a"], "r/ell": meta["r_over_ell"], "mesh": meta["mesh_level"], "stress concentration": scf}
        expected = meta.get("expected_concentration")
        if expected is not None:
            metrics["expected concentration"] = float(expected)
            metrics["concentration rel error"] = abs(scf - expected) / expected
        if session_path:
            angles, hoop = hoop_stress(result.mesh, result.ops, result.stresses.sigma)
            plot_hoop_stress(angles, hoop / meta["sigma"], expected,
                             save_path=os.path.join(session_path, f"{result.spec.name}_hoop.png"))
        logger.info(f"Case {result.spec.name}: stress concentration {scf:.4f} (expected {expected})")
        return metrics

    def checks(self, report) -> dict:
        if "concentration rel error" not in report.metrics:
            return {}
        tol = float(self.params.get("TOLERANCE", {}).get(report.metrics.get("mesh", "fine"), 0.02))
        return {f"stress concentration within {tol:.0%}": report.metrics["concentration rel error"] <= tol}

    def sweep_checks(self, table) -> dict:
        if table["a"].nunique() > 1:
            ordered = table.sort_values("a")["stress concentration"].to_numpy()
            return {"concentration decreases with a": bool(np.all(np.diff(ordered) < 0))}
        return {}
