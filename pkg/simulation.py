# cosserat_dem/simulation.py
"""
CaseSpec -> solution pipeline without any file output.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from errors import CaseError, CosseratDEMError
from material import StressState
from mesh import FacetPartition, Mesh, facet_classification, generate_box_mesh, generate_rect_mesh
from mesh_io import load_mesh
from probes import probe_functionals
from reconstruction import ReconstructionOperators, build_operators
from solver import (CellBalance, FacetLoadSet, SolverConfig, State, Trajectory, cell_balance,
                    crank_nicolson_run, dem_post, solve_static, stress_field, time_grid)
from system import SystemMatrices, assemble_system, compose_system

logger = logging.getLogger(__name__)


@dataclass
class CaseResult:
    spec: object
    mesh: Mesh
    ops: ReconstructionOperators
    partition: FacetPartition
    parts: SystemMatrices
    q: np.ndarray
    stresses: StressState
    facet_loads: FacetLoadSet
    balance: CellBalance
    trajectory: Trajectory | None = None
    timings: dict = field(default_factory=dict)

    @property
    def dofmap(self):
        return self.parts.dofmap

    def fields(self) -> tuple[np.ndarray, np.ndarray]:
        return self.dofmap.split(self.q)


def build_case_mesh(mesh_source: dict, refine: int = 1) -> Mesh:
    src = dict(mesh_source)
    if "file" in src:
        if refine != 1:
            logger.warning(f"Mesh: refine={refine} ignored for file mesh {src['file']}")
        return load_mesh(src["file"], src.get("format"))
    kind = src.get("generator")
    jitter, seed = float(src.get("jitter", 0.0)), int(src.get("seed", 0))
    if kind == "rect":
        return generate_rect_mesh(float(src["lx"]), float(src["ly"]), int(src["nx"]) * refine,
                                  int(src["ny"]) * refine, origin=tuple(src.get("origin", (0.0, 0.0))),
                                  jitter=jitter, seed=seed)
    if kind == "box":
        return generate_box_mesh(float(src["lx"]), float(src["ly"]), float(src["lz"]),
                                 int(src["nx"]) * refine, int(src["ny"]) * refine, int(src["nz"]) * refine,
                                 origin=tuple(src.get("origin", (0.0, 0.0, 0.0))), jitter=jitter, seed=seed)
    raise CaseError(f"Unknown mesh source {mesh_source}.")


def initial_state(spec, mesh: Mesh, dofmap) -> State | None:
    if spec.initial is None and spec.initial_velocity is None:
        return None
    x = mesh.cell_centers

    def _dofs(fn):
        if fn is None:
            return np.zeros(dofmap.n_dofs)
        u, phi = fn(x)
        return dofmap.join(u, phi)

    q0, v0 = _dofs(spec.initial), _dofs(spec.initial_velocity)
    return State(t=0.0, q=q0, qd=v0, qdd=np.zeros_like(q0))


def solve_spec(spec, refine: int = 1, solver_config: SolverConfig | None = None,
               dt: float | None = None, mesh: Mesh | None = None) -> CaseResult:
    """Builds, assembles and solves one case; raises CaseError with the case name on failure."""
    timings = {}
    try:
        start = time.perf_counter()
        mesh = mesh or build_case_mesh(spec.mesh_source, refine)
        spec.validate(mesh)
        ops = build_operators(mesh)
        partition = facet_classification(mesh, spec.dirichlet_tags)
        timings["setup"] = time.perf_counter() - start

        start = time.perf_counter()
        dynamic = spec.mode == "dynamic"
        parts = assemble_system(mesh, spec.material, ops, partition, spec.bcs, spec.body, dynamic=dynamic)
        timings["assembly"] = time.perf_counter() - start

        start = time.perf_counter()
        trajectory = None
        if dynamic:
            system = compose_system(parts, "dynamic", include_penalty=spec.include_penalty)
            times = time_grid(spec.t_end, dt if dt is not None else spec.dt)
            probes = probe_functionals(mesh, ops, parts.dofmap, spec.probes)
            trajectory = crank_nicolson_run(system, initial_state(spec, mesh, parts.dofmap), times,
                                            probes=probes, store_every=spec.store_every)
            q = trajectory.final.q
        else:
            A, b = compose_system(parts, "static", include_penalty=spec.include_penalty)
            q = solve_static(A, b, solver_config)
        timings["solve"] = time.perf_counter() - start

        stresses = stress_field(mesh, spec.material, ops, q)
        loads = dem_post(mesh, spec.material, ops, q)
        t_final = float(trajectory.times[-1]) if trajectory is not None else 0.0
        balance = cell_balance(mesh, loads, spec.body, t_final)
    except CaseError:
        raise
    except CosseratDEMError as exc:
        raise CaseError(f"Case {spec.name}: {exc}") from exc

    logger.info(f"Case {spec.name}: solved {parts.dofmap.n_dofs} dofs in {timings['solve']:.2f}s")
    return CaseResult(spec=spec, mesh=mesh, ops=ops, partition=partition, parts=parts, q=q,
                      stresses=stresses, facet_loads=loads, balance=balance, trajectory=trajectory,
                      timings=timings)
