# cosserat_dem/cases/lamb.py
"""
Lamb's problem at desk scale: a vertical Ricker source below the free
surface of a rectangle with traction-free boundaries. Probes on a vertical
ray below the source give the P-wave speed; a surface probe picks up the
later surface disturbance.
"""
import logging
import math
import os

import config
from errors import ProbeError
from material import CosseratMaterial2D
from plotting_utils import plot_timeseries
from probes import Probe, arrival_time, peak_time, ricker_source, wave_speed_probe
from system import BodyLoads, BoundaryCondition
from .base_case import BaseCase, CaseSpec

logger = logging.getLogger(__name__)

SURFACE_PROBE = "surface"


def p_wave_speed(lam: float, G: float, rho: float) -> float:
    return math.sqrt((lam + 2.0 * G) / rho)


def ray_probe_name(distance: float) -> str:
    return f"ray_{distance:g}"


class LambCase(BaseCase):
    name = "lamb_desk"
    description = "Ricker source under a free surface, all-Neumann rectangle."

    def build_spec(self, overrides: dict | None = None) -> CaseSpec:
        p = lambda key, default=None: self._p(overrides, key, default)  # noqa: E731
        lx, ly = float(p("LX", 2000.0)), float(p("LY", 1000.0))
        nx, ny = int(p("NX", 100)), int(p("NY", 50))
        G, Gc, lam = float(p("G", 7.52e9)), float(p("GC", 7.52e9)), float(p("LAMBDA", 3.76e9))
        ell = config.lamb_length_scale(lx, nx * self.refine)
        mat = CosseratMaterial2D(G=G, nu=lam / (2.0 * (lam + G)), a=Gc / G, ell=ell,
                                 rho=float(p("RHO", 2500.0)), I=ell ** 2 / 6.0)

        depth = float(p("SOURCE_DEPTH", 100.0))
        source = (0.5 * lx, ly - depth)
        force = ricker_source(float(p("F_C", 14.5)), float(p("T0", 0.1)), source, float(p("SOURCE_RADIUS", 50.0)))
        bcs = {tag: BoundaryCondition(tag, "neumann") for tag in ("left", "right", "bottom", "top")}

        distances = [float(d) for d in p("PROBE_DISTANCES", [200.0, 500.0])]
        probes = [Probe(ray_probe_name(d), (source[0], source[1] - d), "u", 1) for d in distances]
        offset = float(p("SURFACE_OFFSET", 400.0))
        # Just inside the free surface.
        probes.append(Probe(SURFACE_PROBE, (source[0] + offset, ly - 1e-3 * ly / ny), "u", 1))

        mesh_source = {"generator": "rect", "lx": lx, "ly": ly, "nx": nx, "ny": ny}
        return CaseSpec(name=self.name, mesh_source=mesh_source, material=mat, bcs=bcs,
                        body=BodyLoads(force=force), mode="dynamic", t_end=float(p("T_END", 0.5)),
                        dt=self.common_params.get("dt") or float(p("DT", 5.0e-4)), probes=probes,
                        store_every=int(p("STORE_EVERY", 50)),
                        metadata={"lambda": lam, "source": source, "distances": distances,
                                  "surface_distance": math.hypot(offset, depth), "t0": float(p("T0", 0.1))})

    def postprocess(self, result, session_path: str | None = None) -> dict:
        meta, mat, traj = result.spec.metadata, result.spec.material, result.trajectory
        target = p_wave_speed(meta["lambda"], mat.G, mat.rho)
        measured = wave_speed_probe(traj, {ray_probe_name(d): d for d in meta["distances"]})
        metrics = {
            "P-wave speed (analytic)": target,
            "P-wave speed (measured)": measured.speed,
            "P-wave speed rel error": abs(measured.speed - target) / target,
        }
        surface = traj.probes[SURFACE_PROBE]
        try:
            first = arrival_time(traj.times, surface)
            peak = peak_time(traj.times, surface)
            p_time = meta["t0"] + meta["surface_distance"] / target
            metrics.update({"surface first arrival": first, "surface peak time": peak,
                            "surface P arrival (analytic)": p_time,
                            "surface disturbance after P": bool(peak > p_time)})
        except ProbeError as exc:
            logger.warning(f"Case {self.name}: surface probe: {exc}")
            metrics["surface disturbance after P"] = False
        if session_path:
            plot_timeseries(traj.to_frame(), list(traj.probes), title="Lamb probes (vertical displacement)",
                            ylabel="u_y [m]", save_path=os.path.join(session_path, "probes.png"))
        return metrics

    def checks(self, report) -> dict:
        tol = float(self.params.get("SPEED_TOLERANCE", 0.10))
        m = report.metrics
        return {f"P-wave speed within {tol:.0%}": m["P-wave speed rel error"] <= tol,
                "surface disturbance detected after P arrival": m["surface disturbance after P"]}
