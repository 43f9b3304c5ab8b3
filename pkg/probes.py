# cosserat_dem/probes.py
"""
Seismic source, point probes and first-arrival picking.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

import config
from errors import ProbeError
from mesh import Mesh, locate_cells
from reconstruction import ReconstructionOperators, p1_trace_operator
from solver import Trajectory
from system import DofMap

logger = logging.getLogger(__name__)

FIELDS = ("u", "phi")


def ricker_amplitude(t, f_c: float, t0: float):
    """(1 - 2 pi^2 f_c^2 tau^2) exp(-pi^2 f_c^2 tau^2), tau = t - t0."""
    arg = (math.pi * f_c * (np.asarray(t, dtype=float) - t0)) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def mollifier_mass(radius: float, dim: int) -> float:
    """Integral of (1 - r^2/R^2)^2 over the ball of radius R."""
    if dim == 2:
        return math.pi * radius ** 2 / 3.0
    if dim == 3:
        return 32.0 * math.pi * radius ** 3 / 105.0
    raise ProbeError(f"Unsupported dimension {dim}.")


def ricker_source(f_c: float, t0: float, center, radius: float, direction=None, amplitude: float = 1.0):
    """
    Body force f(x, t) = A ricker(t) w(|x - center|) e, with w the normalised
    bump (1 - r^2/R^2)^2 / mass so that the force integrates to A ricker(t) e.

    The direction e defaults to the last coordinate axis (vertical).
    """
    if f_c <= 0:
        raise ProbeError(f"Central frequency must be positive, got {f_c}.")
    if radius <= 0:
        raise ProbeError(f"Source radius must be positive, got {radius}.")
    center = np.asarray(center, dtype=float)
    dim = len(center)
    e = np.zeros(dim)
    e[-1] = 1.0
    if direction is not None:
        e = np.asarray(direction, dtype=float)
        e = e / np.linalg.norm(e)
    scale = amplitude / mollifier_mass(radius, dim)

    def force(x: np.ndarray, t: float) -> np.ndarray:
        r2 = np.sum((np.asarray(x, dtype=float) - center) ** 2, axis=1) / radius ** 2
        w = np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)
        return (scale * float(ricker_amplitude(t, f_c, t0)) * w)[:, None] * e[None, :]

    return force


@dataclass(frozen=True)
class Probe:
    name: str
    point: tuple
    field: str = "u"
    component: int = 0

    def __post_init__(self):
        if self.field not in FIELDS:
            raise ProbeError(f"Probe '{self.name}': unknown field '{self.field}'. Expected one of {FIELDS}.")


def probe_rows(mesh: Mesh, ops: ReconstructionOperators, dofmap: DofMap, probes: list) -> sp.csr_matrix:
    """(n_probes, n_dofs) map sampling R_c(v)(x) in the containing cell of each probe point."""
    if not probes:
        return sp.csr_matrix((0, dofmap.n_dofs))
    points = np.array([p.point for p in probes], dtype=float)
    if points.shape[1] != mesh.dim:
        raise ProbeError(f"Probe points have dimension {points.shape[1]}, mesh has {mesh.dim}.")
    cells = locate_cells(mesh, points)
    trace = p1_trace_operator(mesh, ops, cells, points)
    rows = []
    for k, p in enumerate(probes):
        comp = p.component if p.field == "u" else dofmap.dim + p.component
        limit = dofmap.dim if p.field == "u" else dofmap.n_rot
        if not 0 <= p.component < limit:
            raise ProbeError(f"Probe '{p.name}': component {p.component} out of range for {p.field}.")
        rows.append(trace[k] @ dofmap.selector(comp))
    return sp.vstack(rows).tocsr()


def probe_functionals(mesh: Mesh, ops: ReconstructionOperators, dofmap: DofMap, probes: list) -> dict:
    rows = probe_rows(mesh, ops, dofmap, probes)
    return {p.name: (lambda q, row=rows[k]: float((row @ q)[0])) for k, p in enumerate(probes)}


def arrival_time(times, values, threshold: float | None = None) -> float:
    """First time |v| reaches threshold x max|v|."""
    threshold = config.ARRIVAL_THRESHOLD if threshold is None else threshold
    values = np.abs(np.asarray(values, dtype=float))
    peak = values.max() if values.size else 0.0
    if not np.isfinite(peak) or peak <= 0.0:
        raise ProbeError("no arrival: probe signal is identically zero.")
    hits = np.flatnonzero(values >= threshold * peak)
    if hits.size == 0:
        raise ProbeError("no arrival detected.")
    return float(np.asarray(times, dtype=float)[hits[0]])


@dataclass(frozen=True)
class WaveSpeed:
    speed: float
    arrivals: dict  # probe name -> arrival time
    distances: dict


def wave_speed_probe(trajectory: Trajectory, distances: dict, threshold: float | None = None) -> WaveSpeed:
    """
    Speed from first arrivals along a ray: slope of distance against arrival
    time (a plain difference quotient for two probes).

    Args:
        trajectory: run holding the probe series.
        distances: probe name -> distance from the source along the ray.
    """
    if len(distances) < 2:
        raise ProbeError("Wave speed needs at least two probes along a ray.")
    arrivals = {}
    for name in distances:
        if name not in trajectory.probes:
            raise ProbeError(f"Probe '{name}' was not recorded.")
        arrivals[name] = arrival_time(trajectory.times, trajectory.probes[name], threshold)
    t = np.array([arrivals[n] for n in distances])
    x = np.array([distances[n] for n in distances], dtype=float)
    if np.ptp(t) <= 0.0:
        raise ProbeError(f"Arrival times {t.tolist()} do not separate the probes.")
    speed = float(np.polyfit(t, x, 1)[0])
    logger.info(f"Probes: arrivals {arrivals} -> speed {speed:.1f}")
    return WaveSpeed(speed=speed, arrivals=arrivals, distances=dict(distances))


def peak_time(times, values) -> float:
    values = np.abs(np.asarray(values, dtype=float))
    if values.size == 0 or values.max() <= 0.0:
        raise ProbeError("no arrival: probe signal is identically zero.")
    return float(np.asarray(times, dtype=float)[int(np.argmax(values))])


def write_timeseries(trajectory: Trajectory, path: str) -> None:
    trajectory.to_frame().to_csv(path, index=False)
    logger.info(f"Output: wrote {len(trajectory.times)} time steps to {path}")
