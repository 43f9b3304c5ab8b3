# cosserat_dem/cases/boundary_layer.py
"""
Boundary layer in a sheared square: u_1 and phi prescribed on the bottom and
top, mirror conditions on the lateral sides. The 2D solution only depends on
x_2 and is compared against a finite-difference solve of the 1D problem

    (1 + a) u'' + 2a phi' = 0
    4 ell^2 phi'' - 2a u' - 4a phi = 0
"""
import logging
import os

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from errors import CaseError
from material import CosseratMaterial2D
from plotting_utils import plot_profiles
from system import BoundaryCondition
from .base_case import BaseCase, CaseSpec

logger = logging.getLogger(__name__)


def boundary_layer_oracle(height: float, a: float, ell: float, u_top: float, phi_top: float,
                          n: int = 10000) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Second-order central differences on n uniform points, solved as one sparse system.

    Returns:
        tuple: (x2, u_1, phi) sampled on the grid.
    """
    if n < 5:
        raise CaseError(f"Oracle grid needs at least 5 points, got {n}.")
    y = np.linspace(0.0, height, n)
    dy = y[1] - y[0]
    m = n - 2
    D2 = sp.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(m, n)) / dy ** 2
    D1 = sp.diags([-1.0, 1.0], [0, 2], shape=(m, n)) / (2.0 * dy)
    I0 = sp.diags([1.0], [1], shape=(m, n))
    full = sp.bmat([
        [(1.0 + a) * D2, 2.0 * a * D1],
        [-2.0 * a * D1, 4.0 * ell ** 2 * D2 - 4.0 * a * I0],
    ]).tocsc()
    interior = np.concatenate([np.arange(1, n - 1), n + np.arange(1, n - 1)])
    boundary = np.array([0, n - 1, n, 2 * n - 1])
    values = np.array([0.0, u_top, 0.0, phi_top])
    rhs = -(full[:, boundary] @ values)
    sol = spla.spsolve(full[:, interior].tocsc(), rhs)
    u = np.concatenate([[0.0], sol[:m], [u_top]])
    phi = np.concatenate([[0.0], sol[m:], [phi_top]])
    return y, u, phi


def oracle_self_convergence(height: float, a: float, ell: float, u_top: float, phi_top: float,
                            n: int = 10000) -> float:
    """Largest relative change of either profile when the oracle grid is halved."""
    y, u, phi = boundary_layer_oracle(height, a, ell, u_top, phi_top, n)
    y2, u2, phi2 = boundary_layer_oracle(height, a, ell, u_top, phi_top, n // 2)
    du = np.abs(np.interp(y, y2, u2) - u).max() / max(np.abs(u).max(), 1e-300)
    dphi = np.abs(np.interp(y, y2, phi2) - phi).max() / max(np.abs(phi).max(), 1e-300)
    return float(max(du, dphi))


class BoundaryLayerCase(BaseCase):
    name = "boundary_layer"
    description = "Sheared square with mirror sides, compared to the 1D oracle."

    def build_spec(self, overrides: dict | None = None) -> CaseSpec:
        p = lambda key, default=None: self._p(overrides, key, default)  # noqa: E731
        H = float(p("H", 1.0e-3))
        mat = CosseratMaterial2D(G=float(p("G", 1.0e10)), nu=float(p("NU", 0.0)), a=float(p("A", 2.0)),
                                 ell=float(p("ELL", 5.0e-5)))
        u_top = float(p("U_TOP", -0.1))
        phi_top = float(p("PHI_TOP_FACTOR", 0.01)) * H
        shear_only = (1.0, 0.0)
        bcs = {
            "bottom": BoundaryCondition("bottom", "dirichlet", constrain=shear_only),
            "top": BoundaryCondition("top", "dirichlet", displacement=lambda x, t: np.array([u_top, 0.0]),
                                     rotation=lambda x, t: phi_top, constrain=shear_only),
            "left": BoundaryCondition("left", "dirichlet", constrain="tangential", constrain_rotation=False),
            "right": BoundaryCondition("right", "dirichlet", constrain="tangential", constrain_rotation=False),
        }
        mesh_source = {"generator": "rect", "lx": H, "ly": H, "nx": int(p("NX", 10)), "ny": int(p("NY", 50))}
        return CaseSpec(name=self.name, mesh_source=mesh_source, material=mat, bcs=bcs,
                        metadata={"H": H, "u_top": u_top, "phi_top": phi_top})

    def profiles(self, result) -> dict:
        """Mid-column cell values against the oracle sampled at the same heights."""
        mesh, meta, mat = result.mesh, result.spec.metadata, result.spec.material
        H = meta["H"]
        dx = H / (int(result.spec.mesh_source["nx"]) * self.refine)
        cells = np.flatnonzero(np.abs(mesh.cell_centers[:, 0] - 0.5 * H) <= 0.5 * dx)
        cells = cells[np.argsort(mesh.cell_centers[cells, 1])]
        n = int(self.params.get("ORACLE_POINTS", 10000))
        y_ref, u_ref, phi_ref = boundary_layer_oracle(H, mat.a, mat.ell, meta["u_top"], meta["phi_top"], n)
        U, Phi = result.fields()
        y = mesh.cell_centers[cells, 1]
        return {
            "y": y, "u1": U[cells, 0], "phi": Phi[cells, 0],
            "y_ref": y_ref, "u1_ref": u_ref, "phi_ref": phi_ref,
            "u1_ref_cells": np.interp(y, y_ref, u_ref), "phi_ref_cells": np.interp(y, y_ref, phi_ref),
        }

    def postprocess(self, result, session_path: str | None = None) -> dict:
        prof = self.profiles(result)
        err_u = np.abs(prof["u1"] - prof["u1_ref_cells"]).max() / np.abs(prof["u1_ref"]).max()
        err_phi = np.abs(prof["phi"] - prof["phi_ref_cells"]).max() / np.abs(prof["phi_ref"]).max()
        meta, mat = result.spec.metadata, result.spec.material
        n = int(self.params.get("ORACLE_POINTS", 10000))
        drift = oracle_self_convergence(meta["H"], mat.a, mat.ell, meta["u_top"], meta["phi_top"], n)
        if session_path:
            plot_profiles(prof["y"], {"u1": prof["u1"], "phi": prof["phi"]}, prof["y_ref"],
                          {"u1": prof["u1_ref"], "phi": prof["phi_ref"]}, title="Boundary layer",
                          save_path=os.path.join(session_path, "profiles.png"))
        logger.info(f"Case {self.name}: profile errors u1 {err_u:.3%}, phi {err_phi:.3%}")
        return {"u1 max rel error": float(err_u), "phi max rel error": float(err_phi),
                "oracle change under grid halving": drift}

    def checks(self, report) -> dict:
        tol = float(self.params.get("PROFILE_TOLERANCE", 0.10))
        m = report.metrics
        return {
            f"u1 profile error <= {tol:g}": m["u1 max rel error"] <= tol,
            f"phi profile error <= {tol:g}": m["phi max rel error"] <= tol,
            "oracle self-convergence < 1e-3": m["oracle change under grid halving"] < 1e-3,
        }
