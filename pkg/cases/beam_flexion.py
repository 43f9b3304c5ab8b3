# cosserat_dem/cases/beam_flexion.py
"""
3D cantilever clamped at x = 0, hit by a short vertical traction ramp on
the free end, then left to oscillate.
"""
import logging
import os

import numpy as np
import pandas as pd

from material import CosseratMaterial3D
from plotting_utils import plot_timeseries
from probes import Probe
from simulation import solve_spec
from system import BoundaryCondition
from .base_case import BaseCase, CaseSpec

logger = logging.getLogger(__name__)

TIP_PROBE = "tip_uy"
FREE_FACES = ("bottom", "top", "front", "back")


def youngs_modulus(K: float, G: float) -> float:
    return 9.0 * K * G / (3.0 * K + G)


def ramp_traction(E: float, t_c: float, factor: float = 1.0e-6):
    """g(t) = -(t/T_c) E factor e_y for t <= T_c, zero afterwards."""
    def traction(x, t):
        g = np.zeros(3)
        if t <= t_c:
            g[1] = -t * E * factor / t_c
        return g
    return traction


class BeamFlexionCase(BaseCase):
    name = "beam_flexion"
    description = "Dynamic flexion of a clamped 3D Cosserat beam."

    def build_spec(self, overrides: dict | None = None) -> CaseSpec:
        p = lambda key, default=None: self._p(overrides, key, default)  # noqa: E731
        length, width = float(p("LENGTH", 1.0e-3)), float(p("WIDTH", 4.0e-5))
        K, G, Gc = float(p("K", 16.67e9)), float(p("G", 10.0e9)), float(p("GC", 5.0e9))
        ell = float(p("ELL_FACTOR", 0.01)) * length
        mat = CosseratMaterial3D(K=K, G=G, Gc=Gc, L=G * ell ** 2, M=2.5 * G * ell ** 2, Mc=2.5 * G * ell ** 2,
                                 rho=float(p("RHO", 2500.0)), I=0.4 * ell ** 2, ell=ell)
        t_end = float(p("T_END", 6.3e-5)) * float(p("T_FRACTION", 1.0))
        steps = int(p("STEPS", 2000))
        dt = self.common_params.get("dt") or t_end / steps

        bcs = {
            "left": BoundaryCondition("left", "dirichlet"),
            "right": BoundaryCondition("right", "neumann",
                                       traction=ramp_traction(youngs_modulus(K, G), float(p("T_C", 3.2e-8)),
                                                              float(p("LOAD_FACTOR", 1.0e-6)))),
        }
        bcs.update({tag: BoundaryCondition(tag, "neumann") for tag in FREE_FACES})
        mesh_source = {"generator": "box", "lx": length, "ly": width, "lz": width,
                       "nx": int(p("NX", 20)), "ny": int(p("NY", 2)), "nz": int(p("NZ", 2))}
        probes = [Probe(TIP_PROBE, (length, 0.5 * width, 0.5 * width), "u", 1)]
        return CaseSpec(name=self.name, mesh_source=mesh_source, material=mat, bcs=bcs, mode="dynamic",
                        t_end=t_end, dt=dt, probes=probes, store_every=max(1, steps // 10),
                        metadata={"length": length, "steps": steps})

    def postprocess(self, result, session_path: str | None = None) -> dict:
        traj = result.trajectory
        tip = traj.probes[TIP_PROBE]
        if session_path:
            plot_timeseries(traj.to_frame(), [TIP_PROBE], title="Beam tip displacement", ylabel="u_y [m]",
                            save_path=os.path.join(session_path, "tip_displacement.png"))
        return {"max |tip u_y|": float(np.abs(tip).max()), "finite": bool(np.all(np.isfinite(tip))),
                "steps": len(traj.times) - 1}

    def checks(self, report) -> dict:
        m = report.metrics
        bound = float(self.params.get("TIP_BOUND", 1.0e-5))
        return {"tip series finite": m["finite"],
                "tip displacement bounded": 0.0 < m["max |tip u_y|"] < bound}


def dt_convergence_study(case: BeamFlexionCase, steps=(500, 1000, 2000), fraction: float = 0.25) -> pd.DataFrame:
    """
    Tip series under successive halvings of dt over a fraction of T. Each row
    holds the max difference to the previous (coarser) run on the coarse times.
    """
    rows, previous = [], None
    for n in steps:
        result = solve_spec(case.build_spec({"STEPS": n, "T_FRACTION": fraction}), refine=case.refine)
        tip = result.trajectory.probes[TIP_PROBE]
        diff = np.nan
        if previous is not None:
            stride = (len(tip) - 1) // (len(previous) - 1)
            diff = float(np.abs(tip[::stride] - previous).max())
        rows.append({"steps": n, "dt": float(result.trajectory.times[1] - result.trajectory.times[0]),
                     "max_tip": float(np.abs(tip).max()), "linf_diff_to_previous": diff})
        previous = tip
        logger.info(f"Case {case.name}: {n} steps, tip max {rows[-1]['max_tip']:.3e}, diff {diff:.3e}")
    return pd.DataFrame(rows)
