# cosserat_dem/system.py
"""
Assembly of the discrete forms over the cell-dof space.

Matrices are indexed [test dof, trial dof]. Dofs are stored per cell in
contiguous blocks (u_0..u_{d-1}, phi_0..phi_{r-1}).
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.io
import scipy.sparse as sp

from errors import AssemblyError
from material import StrainOperators, build_strain_operators
from mesh import FacetPartition, Mesh, Quadrature, cell_quadrature, facet_quadrature
from reconstruction import ReconstructionOperators, p1_trace_operator

logger = logging.getLogger(__name__)

CONSTRAINT_MODES = ("full", "normal", "tangential")


@dataclass(frozen=True)
class DofMap:
    n_cells: int
    dim: int
    n_rot: int

    @property
    def per_cell(self) -> int:
        return self.dim + self.n_rot

    @property
    def n_dofs(self) -> int:
        return self.per_cell * self.n_cells

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(self.n_cells) * self.per_cell

    def u(self, c, i: int):
        return np.asarray(c) * self.per_cell + i

    def phi(self, c, k: int = 0):
        return np.asarray(c) * self.per_cell + self.dim + k

    def selector(self, comp: int) -> sp.csr_matrix:
        """(n_cells, n_dofs) map picking component comp of every cell."""
        n = self.n_cells
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.offsets + comp)), shape=(n, self.n_dofs))

    def split(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Q = np.asarray(q).reshape(self.n_cells, self.per_cell)
        return Q[:, :self.dim], Q[:, self.dim:]

    def join(self, U: np.ndarray, Phi: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float).reshape(self.n_cells, self.dim)
        Phi = np.asarray(Phi, dtype=float).reshape(self.n_cells, self.n_rot)
        return np.hstack([U, Phi]).ravel()


@dataclass
class BoundaryCondition:
    """
    Data attached to one boundary tag.

    Field callables take (x: (n, d) points, t: time) and return (n, k) arrays
    (a (k,) constant or, for scalars, an (n,) array is also accepted).
    """
    tag: str
    kind: str = "dirichlet"  # "dirichlet" or "neumann"
    displacement: Callable | None = None
    rotation: Callable | None = None
    velocity: Callable | None = None
    rotation_rate: Callable | None = None
    traction: Callable | None = None
    couple: Callable | None = None
    constrain: str | tuple = "full"  # "full", "normal", "tangential" or a component mask
    constrain_rotation: bool = True

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise AssemblyError(f"Boundary '{self.tag}': unknown kind '{self.kind}'.")
        if isinstance(self.constrain, str) and self.constrain not in CONSTRAINT_MODES:
            raise AssemblyError(f"Boundary '{self.tag}': unknown constraint '{self.constrain}'.")

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == "dirichlet"


@dataclass
class BodyLoads:
    force: Callable | None = None  # f(x, t) -> (n, d)
    couple: Callable | None = None  # c(x, t) -> (n, r)


@dataclass
class SystemMatrices:
    dofmap: DofMap
    K_elas: sp.csr_matrix
    K_pen: sp.csr_matrix
    K_con: sp.csr_matrix
    K_nsym: sp.csr_matrix
    M: np.ndarray
    C_damp: sp.csr_matrix
    rhs_load: np.ndarray
    rhs_nsym: np.ndarray
    load_at: Callable[[float], np.ndarray] | None = field(default=None, repr=False)

    def stiffness(self, include_penalty: bool = True) -> sp.csr_matrix:
        A = self.K_elas + self.K_con + self.K_nsym
        if include_penalty:
            A = A + self.K_pen
        return A.tocsr()

    def rhs(self, t: float = 0.0) -> np.ndarray:
        if self.load_at is not None:
            return self.load_at(t)
        return self.rhs_load + self.rhs_nsym


@dataclass(frozen=True)
class DynamicSystem:
    A: sp.csr_matrix
    M: np.ndarray
    C: sp.csr_matrix
    load_at: Callable[[float], np.ndarray]
    K_sym: sp.csr_matrix  # K_elas + K_pen, for the discrete energy


# --- Field evaluation helpers ---

def evaluate_field(fn: Callable | None, x: np.ndarray, t: float, ncomp: int) -> np.ndarray:
    n = len(x)
    if fn is None:
        return np.zeros((n, ncomp))
    vals = np.asarray(fn(x, t), dtype=float)
    if vals.ndim == 0:
        vals = np.full(ncomp, float(vals))
    if vals.ndim == 1 and vals.shape[0] == n and ncomp == 1:
        vals = vals[:, None]
    return np.broadcast_to(vals, (n, ncomp)).copy()


def _integrate_by_owner(quad: Quadrature, values: np.ndarray, owners: np.ndarray) -> np.ndarray:
    """Per-owner integrals of point values; rows ordered like `owners`."""
    pos = {int(o): k for k, o in enumerate(owners)}
    idx = np.array([pos[int(o)] for o in quad.owner], dtype=int)
    out = np.zeros((len(owners), values.shape[1]))
    np.add.at(out, idx, quad.weights[:, None] * values)
    return out


def _tensor_form(left: list, right: list, tensor: np.ndarray, weights: np.ndarray, shape: tuple) -> sp.csr_matrix:
    """sum_ik left_i^T diag(weights * tensor[:, i, k]) right_k."""
    out = sp.csr_matrix(shape)
    for i, L in enumerate(left):
        for k, R in enumerate(right):
            coef = weights * tensor[:, i, k]
            if not np.any(coef):
                continue
            out = out + L.T @ sp.diags(coef) @ R
    return out.tocsr()


def _acoustic(T: np.ndarray, normals: np.ndarray, ncomp: int, dim: int) -> np.ndarray:
    """A[q, i, k] = sum_jl T[i d + j, k d + l] n_j n_l."""
    T4 = T.reshape(ncomp, dim, ncomp, dim)
    return np.einsum("ijkl,qj,ql->qik", T4, normals, normals)


def constraint_projectors(normals: np.ndarray, bcs: list, dim: int, n_rot: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-facet projectors on the constrained displacement and rotation components."""
    n = len(normals)
    Pu = np.zeros((n, dim, dim))
    Pr = np.zeros((n, n_rot, n_rot))
    eye = np.eye(dim)
    for f, (nf, bc) in enumerate(zip(normals, bcs)):
        mode = bc.constrain
        if isinstance(mode, str):
            if mode == "full":
                Pu[f] = eye
            elif mode == "normal":
                Pu[f] = np.outer(nf, nf)
            else:
                Pu[f] = eye - np.outer(nf, nf)
        else:
            mask = np.asarray(mode, dtype=float)
            if mask.shape != (dim,):
                raise AssemblyError(f"Boundary '{bc.tag}': component mask must have {dim} entries.")
            Pu[f] = np.diag(mask)
        if bc.constrain_rotation:
            Pr[f] = np.eye(n_rot)
    return Pu, Pr


def _bcs_for(mesh: Mesh, facets: np.ndarray, bcs) -> list:
    if isinstance(bcs, BoundaryCondition):
        return [bcs] * len(facets)
    out = []
    for f in facets:
        tag = mesh.boundary_tags.get(int(f))
        bc = (bcs or {}).get(tag)
        if bc is None:
            raise AssemblyError(f"Facet {int(f)} with tag '{tag}' has no boundary data.")
        out.append(bc)
    return out


# --- Bilinear forms ---

def assemble_elastic(mesh: Mesh, mat, ops: ReconstructionOperators, strain_ops: StrainOperators | None = None) -> sp.csr_matrix:
    """v^T K w = sum_c |c| (e_c(v):C:e_c(w) + kappa_c(v):D:kappa_c(w))."""
    so = strain_ops or build_strain_operators(mesh.n_cells, ops, mat.dim, mat.n_rot)
    vol = sp.diags(mesh.cell_volumes)
    WC = sp.kron(vol, sp.csr_matrix(mat.C), format="csr")
    WD = sp.kron(vol, sp.csr_matrix(mat.D), format="csr")
    return (so.E.T @ WC @ so.E + so.K.T @ WD @ so.K).tocsr()


def jump_operator(mesh: Mesh, ops: ReconstructionOperators, facets: np.ndarray, quad: Quadrature) -> sp.csr_matrix:
    """Scalar jump [R(v)] = R_{c-}(v) - R_{c+}(v) at the quadrature points of interior facets."""
    cm = mesh.facet_cells[quad.owner, 0]
    cp = mesh.facet_cells[quad.owner, 1]
    if np.any(cp < 0):
        raise AssemblyError("Jump operator requested on a boundary facet.")
    return (p1_trace_operator(mesh, ops, cm, quad.points) - p1_trace_operator(mesh, ops, cp, quad.points)).tocsr()


def assemble_inner_penalty(mesh: Mesh, mat, ops: ReconstructionOperators, dofmap: DofMap | None = None) -> sp.csr_matrix:
    """sum_F (1/h_F) int_F ([R(u)] x n):C:([R(v)] x n) + ([R(phi)] x n):D:([R(psi)] x n)."""
    dm = dofmap or DofMap(mesh.n_cells, mat.dim, mat.n_rot)
    facets = mesh.interior_facets
    shape = (dm.n_dofs, dm.n_dofs)
    if len(facets) == 0:
        return sp.csr_matrix(shape)
    quad = facet_quadrature(mesh, facets)
    J = jump_operator(mesh, ops, facets, quad)
    normals = mesh.facet_normals[quad.owner]
    weights = quad.weights / mesh.facet_diameters[quad.owner]
    Ju = [J @ dm.selector(i) for i in range(mat.dim)]
    Jr = [J @ dm.selector(mat.dim + k) for k in range(mat.n_rot)]
    K = _tensor_form(Ju, Ju, _acoustic(mat.C, normals, mat.dim, mat.dim), weights, shape)
    K = K + _tensor_form(Jr, Jr, _acoustic(mat.D, normals, mat.n_rot, mat.dim), weights, shape)
    return K.tocsr()


@dataclass(frozen=True)
class NitscheOperators:
    facets: np.ndarray
    areas: np.ndarray
    Pu: np.ndarray
    Pr: np.ndarray
    trace_u: list  # R_F(u_i), (n_facets, n_dofs) each
    trace_r: list
    traction: list  # (sigma_c n_F)_i
    couple_traction: list  # (mu_c n_F)_k
    quad: Quadrature
    bcs: list


def nitsche_operators(mesh: Mesh, mat, ops: ReconstructionOperators, partition: FacetPartition, bcs,
                      strain_ops: StrainOperators | None = None, dofmap: DofMap | None = None) -> NitscheOperators:
    dm = dofmap or DofMap(mesh.n_cells, mat.dim, mat.n_rot)
    so = strain_ops or build_strain_operators(mesh.n_cells, ops, mat.dim, mat.n_rot)
    d, r = mat.dim, mat.n_rot
    facets = np.asarray(partition.dirichlet, dtype=int)
    nF = len(facets)
    cells = mesh.facet_cells[facets, 0]
    normals = mesh.facet_normals[facets]
    bc_list = _bcs_for(mesh, facets, bcs)
    Pu, Pr = constraint_projectors(normals, bc_list, d, r)

    select = sp.csr_matrix((np.ones(nF), (np.arange(nF), cells)), shape=(nF, mesh.n_cells))
    R_D = ops.R[facets]
    trace_u = [(R_D @ dm.selector(i)).tocsr() for i in range(d)]
    trace_r = [(R_D @ dm.selector(d + k)).tocsr() for k in range(r)]

    E_rows = [select @ so.E[m::d * d] for m in range(d * d)]
    K_rows = [select @ so.K[m::r * d] for m in range(r * d)]
    C, D = mat.C, mat.D

    def _flux(T, rows, ncomp):
        out = []
        for i in range(ncomp):
            acc = sp.csr_matrix((nF, dm.n_dofs))
            for j in range(d):
                comp = sp.csr_matrix((nF, dm.n_dofs))
                for m, Em in enumerate(rows):
                    if T[i * d + j, m] != 0.0:
                        comp = comp + T[i * d + j, m] * Em
                acc = acc + sp.diags(normals[:, j]) @ comp
            out.append(acc.tocsr())
        return out

    return NitscheOperators(
        facets=facets,
        areas=mesh.facet_areas[facets],
        Pu=Pu,
        Pr=Pr,
        trace_u=trace_u,
        trace_r=trace_r,
        traction=_flux(C, E_rows, d),
        couple_traction=_flux(D, K_rows, r),
        quad=facet_quadrature(mesh, facets),
        bcs=bc_list,
    )


def nitsche_rhs(nops: NitscheOperators, n_dofs: int, dim: int, n_rot: int, t: float = 0.0) -> np.ndarray:
    """int_F (sigma(v) n).P u_D + (mu(psi) n).P phi_D over Dirichlet facets."""
    rhs = np.zeros(n_dofs)
    if len(nops.facets) == 0:
        return rhs
    u_int = np.zeros((len(nops.facets), dim))
    r_int = np.zeros((len(nops.facets), n_rot))
    pts = nops.quad.points
    owner_pos = np.searchsorted(nops.facets, nops.quad.owner) if np.all(np.diff(nops.facets) > 0) else None
    if owner_pos is None:
        lookup = {int(f): k for k, f in enumerate(nops.facets)}
        owner_pos = np.array([lookup[int(f)] for f in nops.quad.owner], dtype=int)
    for bc in {id(b): b for b in nops.bcs}.values():
        mask_f = np.array([b is bc for b in nops.bcs])
        mask_q = mask_f[owner_pos]
        if not mask_q.any():
            continue
        w = nops.quad.weights[mask_q][:, None]
        np.add.at(u_int, owner_pos[mask_q], w * evaluate_field(bc.displacement, pts[mask_q], t, dim))
        np.add.at(r_int, owner_pos[mask_q], w * evaluate_field(bc.rotation, pts[mask_q], t, n_rot))
    u_proj = np.einsum("fik,fk->fi", nops.Pu, u_int)
    r_proj = np.einsum("fik,fk->fi", nops.Pr, r_int)
    for i in range(dim):
        rhs += nops.traction[i].T @ u_proj[:, i]
    for k in range(n_rot):
        rhs += nops.couple_traction[k].T @ r_proj[:, k]
    return rhs


def assemble_nitsche(mesh: Mesh, mat, ops: ReconstructionOperators, partition: FacetPartition, bcs,
                     t: float = 0.0, strain_ops: StrainOperators | None = None, dofmap: DofMap | None = None,
                     nops: NitscheOperators | None = None):
    """
    Non-symmetric Nitsche terms on the Dirichlet facets. nops reuses facet
    operators already built for the same partition.

    Returns:
        tuple: (K_con, K_nsym, rhs_nsym) with K_nsym = -K_con^T.
    """
    dm = dofmap or DofMap(mesh.n_cells, mat.dim, mat.n_rot)
    shape = (dm.n_dofs, dm.n_dofs)
    if len(partition.dirichlet) == 0:
        zero = sp.csr_matrix(shape)
        return zero, zero.copy(), np.zeros(dm.n_dofs)
    if nops is None:
        nops = nitsche_operators(mesh, mat, ops, partition, bcs, strain_ops, dm)
    K_con = -(_tensor_form(nops.trace_u, nops.traction, nops.Pu, nops.areas, shape)
              + _tensor_form(nops.trace_r, nops.couple_traction, nops.Pr, nops.areas, shape))
    K_con = K_con.tocsr()
    K_nsym = (-K_con.T).tocsr()
    return K_con, K_nsym, nitsche_rhs(nops, dm.n_dofs, mat.dim, mat.n_rot, t)


def assemble_mass(mesh: Mesh, mat, dofmap: DofMap | None = None) -> np.ndarray:
    """Diagonal of M: rho |c| on u dofs, rho |c| I on phi dofs."""
    dm = dofmap or DofMap(mesh.n_cells, mat.dim, mat.n_rot)
    base = mat.rho * mesh.cell_volumes
    per_cell = np.column_stack([np.repeat(base[:, None], mat.dim, axis=1),
                                np.repeat((base * mat.I)[:, None], mat.n_rot, axis=1)])
    return per_cell.ravel()


def assemble_damping(mesh: Mesh, mat, partition: FacetPartition, dofmap: DofMap | None = None) -> sp.csr_matrix:
    """sum_{F in Dirichlet} (4G/h_F) |F| (u_c.v_c + ell^2 phi_c.psi_c), traces taken from the adjacent cell."""
    dm = dofmap or DofMap(mesh.n_cells, mat.dim, mat.n_rot)
    diag = np.zeros(dm.n_dofs)
    facets = np.asarray(partition.dirichlet, dtype=int)
    if len(facets):
        cells = mesh.facet_cells[facets, 0]
        coef = 4.0 * mat.shear_modulus / mesh.facet_diameters[facets] * mesh.facet_areas[facets]
        ell2 = mat.damping_length ** 2
        for i in range(mat.dim):
            np.add.at(diag, dm.u(cells, i), coef)
        for k in range(mat.n_rot):
            np.add.at(diag, dm.phi(cells, k), coef * ell2)
    return sp.diags(diag, format="csr")


def assemble_damping_rhs(mesh: Mesh, mat, partition: FacetPartition, bcs, t: float,
                         dofmap: DofMap | None = None) -> np.ndarray:
    """Boundary velocity data entering the damping form: (4G/h_F) int_F (u_D' . v + ell^2 phi_D' . psi)."""
    dm = dofmap or DofMap(mesh.n_cells, mat.dim, mat.n_rot)
    rhs = np.zeros(dm.n_dofs)
    facets = np.asarray(partition.dirichlet, dtype=int)
    if len(facets) == 0:
        return rhs
    bc_list = _bcs_for(mesh, facets, bcs)
    if all(b.velocity is None and b.rotation_rate is None for b in bc_list):
        return rhs
    quad = facet_quadrature(mesh, facets)
    lookup = {int(f): k for k, f in enumerate(facets)}
    pos = np.array([lookup[int(f)] for f in quad.owner], dtype=int)
    vel = np.zeros((len(quad.weights), mat.dim))
    rate = np.zeros((len(quad.weights), mat.n_rot))
    for k, bc in enumerate(bc_list):
        sel = pos == k
        vel[sel] = evaluate_field(bc.velocity, quad.points[sel], t, mat.dim)
        rate[sel] = evaluate_field(bc.rotation_rate, quad.points[sel], t, mat.n_rot)
    cells = mesh.facet_cells[quad.owner, 0]
    coef = 4.0 * mat.shear_modulus / mesh.facet_diameters[quad.owner] * quad.weights
    for i in range(mat.dim):
        np.add.at(rhs, dm.u(cells, i), coef * vel[:, i])
    for k in range(mat.n_rot):
        np.add.at(rhs, dm.phi(cells, k), coef * mat.damping_length ** 2 * rate[:, k])
    return rhs


class LoadAssembler:
    """Caches quadrature so loads can be re-evaluated cheaply at every time step."""

    def __init__(self, mesh: Mesh, dofmap: DofMap, body: BodyLoads | None = None,
                 partition: FacetPartition | None = None, bcs=None):
        self.mesh = mesh
        self.dofmap = dofmap
        self.body = body or BodyLoads()
        self.cell_quad = cell_quadrature(mesh) if (self.body.force or self.body.couple) else None
        facets = np.asarray(partition.neumann if partition is not None else [], dtype=int)
        self.neumann = [f for f in facets if (bcs or {}).get(mesh.boundary_tags.get(int(f))) is not None]
        self.neumann = np.array(self.neumann, dtype=int)
        self.bcs = [bcs[mesh.boundary_tags[int(f)]] for f in self.neumann]
        self.facet_quad = facet_quadrature(mesh, self.neumann) if len(self.neumann) else None

    def __call__(self, t: float = 0.0) -> np.ndarray:
        dm, d, r = self.dofmap, self.dofmap.dim, self.dofmap.n_rot
        rhs = np.zeros(dm.n_dofs)
        if self.cell_quad is not None:
            q = self.cell_quad
            f = evaluate_field(self.body.force, q.points, t, d)
            c = evaluate_field(self.body.couple, q.points, t, r)
            for i in range(d):
                np.add.at(rhs, dm.u(q.owner, i), q.weights * f[:, i])
            for k in range(r):
                np.add.at(rhs, dm.phi(q.owner, k), q.weights * c[:, k])
        if self.facet_quad is not None:
            q = self.facet_quad
            lookup = {int(f): k for k, f in enumerate(self.neumann)}
            pos = np.array([lookup[int(f)] for f in q.owner], dtype=int)
            g = np.zeros((len(q.weights), d))
            m = np.zeros((len(q.weights), r))
            for k, bc in enumerate(self.bcs):
                sel = pos == k
                if bc.traction is not None:
                    g[sel] = evaluate_field(bc.traction, q.points[sel], t, d)
                if bc.couple is not None:
                    m[sel] = evaluate_field(bc.couple, q.points[sel], t, r)
            cells = self.mesh.facet_cells[q.owner, 0]
            for i in range(d):
                np.add.at(rhs, dm.u(cells, i), q.weights * g[:, i])
            for k in range(r):
                np.add.at(rhs, dm.phi(cells, k), q.weights * m[:, k])
        return rhs


def assemble_load(mesh: Mesh, dofmap: DofMap, body: BodyLoads | None = None,
                  partition: FacetPartition | None = None, bcs=None, t: float = 0.0) -> np.ndarray:
    """(int_c f).v_c + (int_c c).psi_c plus Neumann (int_F g).v_{c_F} + (int_F m).psi_{c_F}."""
    return LoadAssembler(mesh, dofmap, body, partition, bcs)(t)


# --- Composition ---

def assemble_system(mesh: Mesh, mat, ops: ReconstructionOperators, partition: FacetPartition,
                    bcs: Mapping | None = None, body: BodyLoads | None = None,
                    dynamic: bool = False) -> SystemMatrices:
    bcs = bcs or {}
    dm = DofMap(mesh.n_cells, mat.dim, mat.n_rot)
    so = build_strain_operators(mesh.n_cells, ops, mat.dim, mat.n_rot)
    K_elas = assemble_elastic(mesh, mat, ops, so)
    K_pen = assemble_inner_penalty(mesh, mat, ops, dm)
    shape = (dm.n_dofs, dm.n_dofs)
    nops = nitsche_operators(mesh, mat, ops, partition, bcs, so, dm) if len(partition.dirichlet) else None
    K_con, K_nsym, rhs_nsym = assemble_nitsche(mesh, mat, ops, partition, bcs, 0.0, so, dm, nops=nops)

    loads = LoadAssembler(mesh, dm, body, partition, bcs)
    M = assemble_mass(mesh, mat, dm)
    C = assemble_damping(mesh, mat, partition, dm) if dynamic else sp.csr_matrix(shape)

    def load_at(t: float) -> np.ndarray:
        rhs = loads(t)
        if nops is not None:
            rhs = rhs + nitsche_rhs(nops, dm.n_dofs, mat.dim, mat.n_rot, t)
            if dynamic:
                rhs = rhs + assemble_damping_rhs(mesh, mat, partition, bcs, t, dm)
        return rhs

    rhs_load = loads(0.0)
    logger.info(f"Assembly: {dm.n_dofs} dofs, K_elas nnz={K_elas.nnz}, K_pen nnz={K_pen.nnz}, "
                f"{len(partition.dirichlet)} Dirichlet / {len(partition.neumann)} Neumann facets.")
    return SystemMatrices(dofmap=dm, K_elas=K_elas, K_pen=K_pen, K_con=K_con, K_nsym=K_nsym, M=M,
                          C_damp=C, rhs_load=rhs_load, rhs_nsym=rhs_nsym, load_at=load_at)


def compose_system(parts: SystemMatrices, mode: str = "static", include_penalty: bool = True):
    """
    Static: returns (A, b) with A = K_elas + K_pen + K_con + K_nsym, b = rhs_load + rhs_nsym.
    Dynamic: returns a DynamicSystem handed to the time integrator.
    """
    n = parts.dofmap.n_dofs
    for name in ("K_elas", "K_pen", "K_con", "K_nsym", "C_damp"):
        if getattr(parts, name).shape != (n, n):
            raise AssemblyError(f"{name} has shape {getattr(parts, name).shape}, expected {(n, n)}.")
    for name in ("M", "rhs_load", "rhs_nsym"):
        if getattr(parts, name).shape != (n,):
            raise AssemblyError(f"{name} has shape {getattr(parts, name).shape}, expected {(n,)}.")
    A = parts.stiffness(include_penalty)
    if mode == "static":
        return A, parts.rhs_load + parts.rhs_nsym
    if mode == "dynamic":
        K_sym = (parts.K_elas + parts.K_pen if include_penalty else parts.K_elas).tocsr()
        return DynamicSystem(A=A, M=parts.M, C=parts.C_damp, load_at=parts.rhs, K_sym=K_sym)
    raise AssemblyError(f"Unknown mode '{mode}'. Expected 'static' or 'dynamic'.")


def export_matrices(parts: SystemMatrices, directory: str) -> list:
    """MatrixMarket files for the stiffness blocks and damping, one value per line for vectors."""
    os.makedirs(directory, exist_ok=True)
    written = []
    for name in ("K_elas", "K_pen", "K_con", "K_nsym", "C_damp"):
        path = os.path.join(directory, f"{name}.mtx")
        scipy.io.mmwrite(path, getattr(parts, name))
        written.append(path)
    for name in ("M", "rhs_load", "rhs_nsym"):
        path = os.path.join(directory, f"{name}.txt")
        np.savetxt(path, getattr(parts, name))
        written.append(path)
    logger.info(f"Assembly: exported {len(written)} matrix/vector files to {directory}")
    return written
