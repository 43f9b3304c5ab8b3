# cosserat_dem/solver.py
"""
Static and dynamic solves, condition number estimates and the DEM reading
of a solution (facet forces/couples, cell moments, cell balances).
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import pandas as pd
import scipy.sparse as sp
import scipy.sparse.linalg as spla

import config
from errors import SolverError
from material import StressState, moment_of_stress, stress_state, strain_from_dofs
from mesh import Mesh, cell_quadrature
from reconstruction import ReconstructionOperators
from system import BodyLoads, DynamicSystem, evaluate_field

logger = logging.getLogger(__name__)


@dataclass
class State:
    t: float
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray

    def __post_init__(self):
        for name in ("q", "qd", "qdd"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise SolverError(f"State at t={self.t}: non-finite entries in {name}.")

    @classmethod
    def at_rest(cls, n_dofs: int, t: float = 0.0) -> "State":
        return cls(t=t, q=np.zeros(n_dofs), qd=np.zeros(n_dofs), qdd=np.zeros(n_dofs))


@dataclass(frozen=True)
class SolverConfig:
    method: str = config.SOLVER_METHOD
    rtol: float = config.KRYLOV_RTOL
    maxiter_factor: int = config.KRYLOV_MAXITER_FACTOR
    fail_rtol: float = config.RESIDUAL_FAIL_RTOL

    def __post_init__(self):
        if self.method not in config.SOLVER_CHOICES:
            raise SolverError(f"Unknown solver '{self.method}'. Expected one of {config.SOLVER_CHOICES}.")


@dataclass
class Trajectory:
    times: np.ndarray  # every step, including t0
    energies: np.ndarray
    states: list = field(default_factory=list)  # subsampled
    probes: dict = field(default_factory=dict)  # name -> values at every step

    @property
    def final(self) -> State:
        return self.states[-1]

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"step": np.arange(len(self.times)), "t": self.times, "energy": self.energies})
        for name, values in self.probes.items():
            df[name] = values
        return df


@dataclass(frozen=True)
class ConditionEstimate:
    value: float
    sigma_max: float
    sigma_min: float
    iterations: int
    residuals: tuple
    converged: bool
    method: str


@dataclass(frozen=True)
class FacetLoadSet:
    facets: np.ndarray  # interior facet ids
    forces: np.ndarray  # (n, d): |F| {sigma}_F n_F, acting on c_minus; c_plus receives the negative
    couples: np.ndarray  # (n, r): |F| {mu}_F n_F
    cell_moments: np.ndarray  # (n_cells, r): |c| eps:sigma_c
    boundary_facets: np.ndarray
    boundary_forces: np.ndarray  # (nb, d): |F| sigma_{c_F} n_F
    boundary_gaps: np.ndarray  # (nb, d): u_{c_F} - R_F(u)

    def on_cell(self, mesh: Mesh, cell: int) -> tuple[np.ndarray, np.ndarray]:
        """Net interior facet force and couple on one cell, signs from iota_{c,F}."""
        pos = {int(f): k for k, f in enumerate(self.facets)}
        force = np.zeros(self.forces.shape[1])
        couple = np.zeros(self.couples.shape[1])
        for f, s in zip(mesh.cell_facets[cell], mesh.cell_facet_signs[cell]):
            k = pos.get(int(f))
            if k is not None:
                force += s * self.forces[k]
                couple += s * self.couples[k]
        return force, couple


@dataclass(frozen=True)
class CellBalance:
    residual: np.ndarray  # (n_cells, d)
    scale: float  # largest facet force magnitude
    interior_cells: np.ndarray

    @property
    def interior_max(self) -> float:
        if len(self.interior_cells) == 0 or self.scale == 0.0:
            return 0.0
        return float(np.linalg.norm(self.residual[self.interior_cells], axis=1).max() / self.scale)


# --- Static ---

def _ilu_preconditioner(A: sp.csc_matrix) -> spla.LinearOperator:
    ilu = spla.spilu(A, drop_tol=config.ILU_DROP_TOL, fill_factor=config.ILU_FILL_FACTOR)
    return spla.LinearOperator(A.shape, ilu.solve)


def _krylov_solve(A: sp.csc_matrix, b: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    try:
        M = _ilu_preconditioner(A)
    except RuntimeError as exc:
        logger.warning(f"Solver: ILU failed ({exc}); running GMRES without preconditioner.")
        M = None
    maxiter = cfg.maxiter_factor * A.shape[0]
    q, info = spla.gmres(A, b, rtol=cfg.rtol, atol=0.0, maxiter=maxiter, M=M)
    if info > 0:
        raise SolverError(f"GMRES did not converge to rtol={cfg.rtol} within {maxiter} iterations.")
    if info < 0:
        raise SolverError(f"GMRES failed with illegal input (info={info}).")
    return q


def solve_static(A, b, solver_config: SolverConfig | None = None) -> np.ndarray:
    """
    Solves A q = b.

    The direct path factors A with SuperLU and applies up to two steps of
    iterative refinement if the relative residual is above DIRECT_RTOL. The
    Krylov path runs ILU-preconditioned GMRES. A final relative residual
    above fail_rtol raises SolverError; above the method tolerance it is
    logged.
    """
    cfg = solver_config or SolverConfig()
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise SolverError(f"Shape mismatch: A {A.shape}, b {b.shape}.")
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(n)

    start = time.perf_counter()
    if cfg.method == "direct":
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise SolverError(f"Sparse LU factorization failed: {exc}") from exc
        q = lu.solve(b)
        for _ in range(2):
            r = b - A @ q
            if np.linalg.norm(r) <= config.DIRECT_RTOL * b_norm:
                break
            q = q + lu.solve(r)
    else:
        q = _krylov_solve(A, b, cfg)

    if not np.all(np.isfinite(q)):
        raise SolverError("Solution contains non-finite values (singular system?).")
    rel = np.linalg.norm(A @ q - b) / b_norm
    tol = config.DIRECT_RTOL if cfg.method == "direct" else cfg.rtol
    if rel > max(tol, cfg.fail_rtol):
        raise SolverError(f"Relative residual {rel:.2e} exceeds {cfg.fail_rtol:.0e} after the {cfg.method} solve "
                          f"(system numerically singular?).")
    if rel > tol:
        logger.warning(f"Solver: relative residual {rel:.2e} above tolerance {tol:.0e}.")
    logger.info(f"Solver: {cfg.method} solve of {n} dofs in {time.perf_counter() - start:.2f}s, residual {rel:.2e}")
    return q


# --- Dynamics ---

def time_grid(t_end: float, dt: float | None = None, t0: float = 0.0) -> np.ndarray:
    """Uniform grid t0, t0 + dt, ..., t_end; dt defaults to (t_end - t0) / DT_DIVISOR."""
    if t_end <= t0:
        raise SolverError(f"End time {t_end} must exceed start time {t0}.")
    dt = dt if dt is not None else (t_end - t0) / config.DT_DIVISOR
    if dt <= 0:
        raise SolverError(f"Time step must be positive, got {dt}.")
    steps = int(round((t_end - t0) / dt))
    return t0 + dt * np.arange(steps + 1)


def discrete_energy(system: DynamicSystem, q: np.ndarray, qd: np.ndarray) -> float:
    """1/2 qd^T M qd + 1/2 q^T (K_elas + K_pen) q."""
    return float(0.5 * qd @ (system.M * qd) + 0.5 * q @ (system.K_sym @ q))


def crank_nicolson_run(system: DynamicSystem, initial: State | None, times: np.ndarray,
                       load: Callable[[float], np.ndarray] | None = None,
                       probes: Mapping[str, Callable[[np.ndarray], float]] | None = None,
                       store_every: int = 1) -> Trajectory:
    """
    Average-acceleration Newmark scheme with the damping force taken at the
    new velocity qd1 = (2/dt)(q1 - q0) - qd0:

        [(4/dt^2) M + (2/dt) C + A] q1 = L(t1) + M [(4/dt^2) q0 + (4/dt) qd0 + qdd0]
                                          + C [(2/dt) q0 + qd0]

    Unconditionally stable for any symmetric C >= 0.

    Args:
        system: output of compose_system(..., mode="dynamic").
        initial: state at times[0]; rest when None. Its acceleration is
            recomputed from M qdd = L - C qd - A q.
        times: uniform time grid.
        load: L(t); defaults to system.load_at.
        probes: name -> scalar functional of q, sampled at every step.
        store_every: keep every n-th state (the last one is always kept).
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise SolverError("Time grid needs at least two points.")
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
        raise SolverError("Time grid must be uniform and increasing.")
    m = np.asarray(system.M, dtype=float)
    if np.any(m <= 0):
        raise SolverError("Mass matrix must be diagonal positive.")
    load = load or system.load_at
    A, C = system.A, system.C
    n = A.shape[0]

    q = np.zeros(n) if initial is None else np.asarray(initial.q, dtype=float).copy()
    qd = np.zeros(n) if initial is None else np.asarray(initial.qd, dtype=float).copy()
    qdd = (load(times[0]) - C @ qd - A @ q) / m

    c2 = 4.0 / dt ** 2
    try:
        lu = spla.splu(sp.csc_matrix(sp.diags(c2 * m) + (2.0 / dt) * C + A))
    except RuntimeError as exc:
        raise SolverError(f"Factorization of the Crank-Nicolson operator failed: {exc}") from exc

    probes = dict(probes or {})
    samples = {name: np.zeros(len(times)) for name in probes}
    energies = np.zeros(len(times))

    def _record(k: int):
        energies[k] = discrete_energy(system, q, qd)
        for name, fn in probes.items():
            samples[name][k] = fn(q)

    _record(0)
    states = [State(times[0], q.copy(), qd.copy(), qdd.copy())]
    start = time.perf_counter()
    for k in range(1, len(times)):
        t = times[k]
        rhs = load(t) + m * (c2 * q + (4.0 / dt) * qd + qdd) + C @ ((2.0 / dt) * q + qd)
        q_new = lu.solve(rhs)
        if not np.all(np.isfinite(q_new)):
            raise SolverError(f"Step {k} (t={t:.6e}): non-finite solution.")
        qdd_new = c2 * (q_new - q - dt * qd) - qdd
        qd = qd + 0.5 * dt * (qdd + qdd_new)
        q, qdd = q_new, qdd_new
        _record(k)
        if k % store_every == 0 or k == len(times) - 1:
            states.append(State(t, q.copy(), qd.copy(), qdd.copy()))
        if k % max(1, (len(times) - 1) // 10) == 0:
            logger.debug(f"Dynamics: step {k}/{len(times) - 1}, t={t:.4e}, energy={energies[k]:.4e}")
    logger.info(f"Dynamics: {len(times) - 1} steps of dt={dt:.3e} in {time.perf_counter() - start:.2f}s")
    return Trajectory(times=times, energies=energies, states=states, probes=samples)


# --- Conditioning ---

def _power_iteration(apply: Callable[[np.ndarray], np.ndarray], n: int, maxiter: int, stagnation: float):
    x = np.random.default_rng(0).standard_normal(n)
    x /= np.linalg.norm(x)
    value, history = 0.0, []
    for it in range(1, maxiter + 1):
        y = apply(x)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0, it, tuple(history), True
        x = y / new
        history.append(abs(new - value) / new)
        if it > 1 and history[-1] < stagnation:
            return new, it, tuple(history), True
        value = new
    return value, maxiter, tuple(history), False


def condition_estimate(A, method: str | None = None, maxiter: int | None = None,
                       stagnation: float | None = None) -> ConditionEstimate:
    """
    Estimates the 2-norm condition number of A.

    "power": power iteration on A^T A for sigma_max and inverse iteration
    through a sparse LU of A for sigma_min. "lsmr": the running estimate
    reported by scipy's LSMR.
    """
    method = method or config.CONDITION_METHOD
    maxiter = maxiter or config.CONDITION_MAXITER
    stagnation = stagnation or config.CONDITION_STAGNATION
    A = sp.csc_matrix(A)
    n = A.shape[0]

    if method == "lsmr":
        b = A @ np.random.default_rng(0).standard_normal(n)
        result = spla.lsmr(A, b, atol=1e-12, btol=1e-12, conlim=1e16, maxiter=maxiter * 10)
        istop, itn, norma, conda = result[1], result[2], result[5], result[6]
        converged = istop in (1, 2, 4, 5)
        if not converged:
            logger.warning(f"Conditioning: LSMR stopped with istop={istop} after {itn} iterations.")
        return ConditionEstimate(float(conda), float(norma), float(norma / conda) if conda else np.nan,
                                 int(itn), (), converged, "lsmr")
    if method != "power":
        raise SolverError(f"Unknown condition estimate method '{method}'.")

    ata2, it_max, res_max, ok_max = _power_iteration(lambda x: A.T @ (A @ x), n, maxiter, stagnation)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"Condition estimate: matrix is singular ({exc}).") from exc
    inv2, it_min, res_min, ok_min = _power_iteration(lambda x: lu.solve(lu.solve(x, trans="T")), n,
                                                     maxiter, stagnation)
    sigma_max = np.sqrt(ata2)
    sigma_min = 1.0 / np.sqrt(inv2) if inv2 > 0 else 0.0
    converged = ok_max and ok_min
    if not converged:
        logger.warning(f"Conditioning: power iterations did not stagnate within {maxiter} iterations.")
    value = sigma_max / sigma_min if sigma_min > 0 else np.inf
    return ConditionEstimate(float(value), float(sigma_max), float(sigma_min), it_max + it_min,
                             res_max + res_min, converged, "power")


# --- Post-processing ---

def stress_field(mesh: Mesh, mat, ops: ReconstructionOperators, q: np.ndarray) -> StressState:
    """Cellwise-constant sigma and mu."""
    return stress_state(mat, strain_from_dofs(ops, q, mat.dim, mat.n_rot))


def _flux(tensor: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """tensor . n for (n, k, d) tensors, or the dot product for (n, d) vectors."""
    if tensor.ndim == 2:
        return np.einsum("fj,fj->f", tensor, normals)[:, None]
    return np.einsum("fij,fj->fi", tensor, normals)


def dem_post(mesh: Mesh, mat, ops: ReconstructionOperators, q: np.ndarray) -> FacetLoadSet:
    stresses = stress_field(mesh, mat, ops, q)
    sigma, mu = stresses.sigma, stresses.mu
    fi = mesh.interior_facets
    cm, cp = mesh.facet_cells[fi, 0], mesh.facet_cells[fi, 1]
    area = mesh.facet_areas[fi][:, None]
    normals = mesh.facet_normals[fi]
    forces = area * _flux(0.5 * (sigma[cm] + sigma[cp]), normals)
    couples = area * _flux(0.5 * (mu[cm] + mu[cp]), normals)

    moments = mesh.cell_volumes[:, None] * np.asarray(moment_of_stress(sigma)).reshape(mesh.n_cells, -1)

    fb = mesh.boundary_facets
    cb = mesh.facet_cells[fb, 0]
    b_forces = mesh.facet_areas[fb][:, None] * _flux(sigma[cb], mesh.facet_normals[fb])
    U = np.asarray(q, dtype=float).reshape(mesh.n_cells, mat.dim + mat.n_rot)[:, :mat.dim]
    gaps = U[cb] - ops.facet.apply(U)[fb]
    return FacetLoadSet(facets=fi, forces=forces, couples=couples, cell_moments=moments,
                        boundary_facets=fb, boundary_forces=b_forces, boundary_gaps=gaps)


def cell_balance(mesh: Mesh, loads: FacetLoadSet, body: BodyLoads | None = None, t: float = 0.0) -> CellBalance:
    """Per-cell sum_F iota_{c,F} force_F + int_c f over interior facets."""
    d = loads.forces.shape[1]
    residual = np.zeros((mesh.n_cells, d))
    cm = mesh.facet_cells[loads.facets, 0]
    cp = mesh.facet_cells[loads.facets, 1]
    np.add.at(residual, cm, loads.forces)
    np.add.at(residual, cp, -loads.forces)
    if body is not None and body.force is not None:
        quad = cell_quadrature(mesh)
        f = evaluate_field(body.force, quad.points, t, d)
        np.add.at(residual, quad.owner, quad.weights[:, None] * f)
    on_boundary = np.zeros(mesh.n_cells, dtype=bool)
    on_boundary[mesh.facet_cells[mesh.boundary_facets, 0]] = True
    scale = float(np.linalg.norm(loads.forces, axis=1).max()) if len(loads.facets) else 0.0
    return CellBalance(residual=residual, scale=scale, interior_cells=np.flatnonzero(~on_boundary))


def facet_load_table(loads: FacetLoadSet) -> pd.DataFrame:
    cols = {"facet": loads.facets}
    for i in range(loads.forces.shape[1]):
        cols[f"force_{i}"] = loads.forces[:, i]
    for k in range(loads.couples.shape[1]):
        cols[f"couple_{k}"] = loads.couples[:, k]
    return pd.DataFrame(cols)
