# cosserat_dem/reconstruction.py
"""
Facet reconstruction R (barycentric stencils over d+1 nearby cells), the
discrete Stokes gradient G_c and the cellwise nonconforming P1 evaluation.

All operators act on scalar cell fields; vector fields are handled one
component at a time by the callers.
"""
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.sparse as sp

import config
from errors import StencilError
from mesh import BOUNDARY, Mesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FacetStencil:
    facet: int
    cells: tuple
    coefficients: np.ndarray
    rounds: int = 0  # neighbour expansion rounds needed beyond the regular ones

    @property
    def has_negative(self) -> bool:
        return bool((self.coefficients < 0).any())


@dataclass(frozen=True)
class CellGradientOperator:
    cell: int
    facets: np.ndarray
    weights: np.ndarray  # (n_facets_of_cell, d): |F|/|c| n_{F,c}

    def apply(self, facet_values: np.ndarray) -> np.ndarray:
        """Gradient from facet values; returns (d,) for scalars or (k, d) for k-vectors."""
        vals = np.asarray(facet_values)[self.facets]
        if vals.ndim == 1:
            return vals @ self.weights
        return vals.T @ self.weights


@dataclass(frozen=True)
class FacetOperator:
    matrix: sp.csr_matrix  # (n_facets, n_cells)
    stencils: tuple

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


@dataclass(frozen=True)
class GradientOperator:
    dim: int
    facet_to_cell: sp.csr_matrix  # (n_cells * d, n_facets)
    matrix: sp.csr_matrix  # (n_cells * d, n_cells) = facet_to_cell @ R
    cells: tuple

    def component(self, j: int) -> sp.csr_matrix:
        """Rows giving d/dx_j of a scalar cell field, shape (n_cells, n_cells)."""
        return self.matrix[j::self.dim]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """(n_cells,) -> (n_cells, d); (n_cells, k) -> (n_cells, k, d) with grad[c, i, j] = d_j v_i."""
        v = np.asarray(v)
        n = v.shape[0]
        if v.ndim == 1:
            return (self.matrix @ v).reshape(n, self.dim)
        return (self.matrix @ v).reshape(n, self.dim, v.shape[1]).transpose(0, 2, 1)


@dataclass(frozen=True)
class ReconstructionOperators:
    facet: FacetOperator
    gradient: GradientOperator

    @property
    def R(self) -> sp.csr_matrix:
        return self.facet.matrix

    @property
    def B(self) -> sp.csr_matrix:
        return self.gradient.matrix


def _adjacency(mesh: Mesh) -> list:
    return [mesh.neighbors(c) for c in range(mesh.n_cells)]


def _simplex_volume(points: np.ndarray) -> float:
    d = points.shape[1]
    return abs(np.linalg.det(points[1:] - points[0])) / math.factorial(d)


def _expand(candidates: set, adjacency: list) -> set:
    grown = set(candidates)
    for c in candidates:
        grown.update(adjacency[c])
    return grown


def _first_valid_subset(mesh: Mesh, f: int, candidates: set) -> tuple | None:
    d = mesh.dim
    ids = np.array(sorted(candidates), dtype=int)
    if len(ids) < d + 1:
        return None
    dist = np.linalg.norm(mesh.cell_centers[ids] - mesh.facet_centers[f], axis=1)
    ranked = ids[np.lexsort((ids, dist))]
    threshold = config.STENCIL_DEGENERACY_FACTOR * mesh.facet_diameters[f] ** d
    for combo in itertools.combinations(ranked, d + 1):
        if _simplex_volume(mesh.cell_centers[list(combo)]) > threshold:
            return tuple(int(c) for c in combo)
    return None


def select_support(mesh: Mesh, f: int, adjacency: list | None = None) -> tuple[tuple, int]:
    """
    Picks the d+1 support cells of facet f.

    Candidates are the facet's cells grown by STENCIL_EXPANSION_ROUNDS
    neighbour rounds, ranked by barycenter distance to x_F then cell id; the
    first subset in that order with a non-degenerate barycenter simplex wins.
    Up to STENCIL_EMERGENCY_ROUNDS extra rounds are tried before failing.

    Returns:
        tuple: (support cell ids, number of emergency rounds used)
    """
    adjacency = adjacency if adjacency is not None else _adjacency(mesh)
    candidates = {int(c) for c in mesh.facet_cells[f] if c != BOUNDARY}
    for _ in range(config.STENCIL_EXPANSION_ROUNDS):
        candidates = _expand(candidates, adjacency)
    support = _first_valid_subset(mesh, f, candidates)
    extra = 0
    while support is None and extra < config.STENCIL_EMERGENCY_ROUNDS:
        extra += 1
        candidates = _expand(candidates, adjacency)
        support = _first_valid_subset(mesh, f, candidates)
    if support is None:
        raise StencilError(
            f"Facet {f} at {mesh.facet_centers[f]}: no non-degenerate set of {mesh.dim + 1} cells "
            f"among {len(candidates)} candidates."
        )
    if extra:
        logger.warning(f"Stencil: facet {f} needed {extra} emergency expansion round(s).")
    return support, extra


def barycentric_coords(points, x) -> np.ndarray:
    """Solves sum(a) = 1, sum(a_c x_c) = x for the d+1 support barycenters."""
    points = np.asarray(points, dtype=float)
    x = np.asarray(x, dtype=float)
    d = points.shape[1]
    if points.shape[0] != d + 1:
        raise StencilError(f"Expected {d + 1} points for barycentric coordinates, got {points.shape[0]}.")
    system = np.vstack([np.ones(d + 1), points.T])
    rhs = np.concatenate([[1.0], x])
    scale = np.ptp(points, axis=0).max()
    if scale == 0.0 or _simplex_volume(points) <= config.STENCIL_DEGENERACY_FACTOR * scale ** d:
        raise StencilError(f"Degenerate simplex {points.tolist()}.")
    try:
        return np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise StencilError(f"Singular barycentric system for {points.tolist()}: {exc}") from exc


def build_facet_operator(mesh: Mesh) -> FacetOperator:
    adjacency = _adjacency(mesh)
    rows, cols, vals = [], [], []
    stencils = []
    for f in range(mesh.n_facets):
        support, extra = select_support(mesh, f, adjacency)
        alpha = barycentric_coords(mesh.cell_centers[list(support)], mesh.facet_centers[f])
        stencils.append(FacetStencil(facet=f, cells=support, coefficients=alpha, rounds=extra))
        rows.extend([f] * len(support))
        cols.extend(support)
        vals.extend(alpha)
    R = sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_facets, mesh.n_cells))
    logger.debug(f"Stencil: built facet operator with {R.nnz} entries for {mesh.n_facets} facets.")
    return FacetOperator(matrix=R, stencils=tuple(stencils))


def build_gradient_operator(mesh: Mesh, facet_op: FacetOperator) -> GradientOperator:
    d = mesh.dim
    rows, cols, vals = [], [], []
    cells = []
    for c in range(mesh.n_cells):
        fs = mesh.cell_facets[c]
        normals = mesh.cell_facet_signs[c][:, None] * mesh.facet_normals[fs]
        weights = (mesh.facet_areas[fs] / mesh.cell_volumes[c])[:, None] * normals
        cells.append(CellGradientOperator(cell=c, facets=fs, weights=weights))
        for j in range(d):
            rows.extend([c * d + j] * len(fs))
            cols.extend(fs)
            vals.extend(weights[:, j])
    G = sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_cells * d, mesh.n_facets))
    return GradientOperator(dim=d, facet_to_cell=G, matrix=(G @ facet_op.matrix).tocsr(), cells=tuple(cells))


def build_operators(mesh: Mesh) -> ReconstructionOperators:
    facet_op = build_facet_operator(mesh)
    return ReconstructionOperators(facet=facet_op, gradient=build_gradient_operator(mesh, facet_op))


def p1_eval(mesh: Mesh, ops: ReconstructionOperators, cell: int, v: np.ndarray, x) -> np.ndarray:
    """R_c(v)(x) = v_c + G_c(v).(x - x_c); x may be a single point or (n, d) points."""
    v = np.asarray(v)
    x = np.asarray(x, dtype=float)
    dx = x - mesh.cell_centers[cell]
    rows = ops.B[cell * mesh.dim:(cell + 1) * mesh.dim]
    grad = rows @ v  # (d,) or (d, k)
    return v[cell] + dx @ grad


def p1_trace_operator(mesh: Mesh, ops: ReconstructionOperators, cells: np.ndarray, points: np.ndarray) -> sp.csr_matrix:
    """Sparse (n_points, n_cells) map evaluating R_{cells[i]}(v) at points[i]."""
    cells = np.asarray(cells, dtype=int)
    n = len(cells)
    select = sp.csr_matrix((np.ones(n), (np.arange(n), cells)), shape=(n, mesh.n_cells))
    op = select.copy()
    dx = np.asarray(points, dtype=float) - mesh.cell_centers[cells]
    for j in range(mesh.dim):
        op = op + sp.diags(dx[:, j]) @ (select @ ops.gradient.component(j))
    return op.tocsr()


@dataclass(frozen=True)
class StencilStatistics:
    locality: float  # max |x_c - x_F| / h over all stencils
    min_volume_ratio: float  # min simplex volume / h_F^d
    negative_coefficients: int  # stencils with at least one negative alpha
    max_abs_coefficient: float
    emergency_rounds: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def stencil_statistics(mesh: Mesh, ops: ReconstructionOperators) -> StencilStatistics:
    h = mesh.h
    locality, min_ratio, max_abs = 0.0, np.inf, 0.0
    negative = emergency = 0
    for st in ops.facet.stencils:
        pts = mesh.cell_centers[list(st.cells)]
        locality = max(locality, float(np.linalg.norm(pts - mesh.facet_centers[st.facet], axis=1).max()) / h)
        min_ratio = min(min_ratio, _simplex_volume(pts) / mesh.facet_diameters[st.facet] ** mesh.dim)
        max_abs = max(max_abs, float(np.abs(st.coefficients).max()))
        negative += int(st.has_negative)
        emergency += int(st.rounds > 0)
    return StencilStatistics(locality, float(min_ratio), negative, max_abs, emergency)


def stencil_table(ops: ReconstructionOperators) -> pd.DataFrame:
    records = []
    for st in ops.facet.stencils:
        row = {"facet": st.facet}
        for k, (c, a) in enumerate(zip(st.cells, st.coefficients)):
            row[f"cell_{k}"] = c
            row[f"alpha_{k}"] = a
        records.append(row)
    return pd.DataFrame.from_records(records)


def dump_stencils(ops: ReconstructionOperators, path: str) -> None:
    stencil_table(ops).to_csv(path, index=False)
    logger.info(f"Stencil: wrote {len(ops.facet.stencils)} stencils to {path}")
