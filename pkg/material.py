# cosserat_dem/material.py
"""
Cosserat constitutive laws.

Tensors are stored flattened row-major: a d x d tensor t maps to
t[i * d + j], so in 2D the order is (xx, xy, yx, yy). C and D are the
matrices acting on those flattened strains and curvatures.
"""
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
import scipy.sparse as sp

from errors import MaterialError
from reconstruction import ReconstructionOperators

EPS_2D = np.array([[0.0, 1.0], [-1.0, 0.0]])


def levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[i, k, j] = -1.0
    return eps


def permutation_tensor(dim: int) -> np.ndarray:
    """(d, d, r) array with (eps . phi)_ij = eps[i, j, k] phi_k."""
    if dim == 2:
        return EPS_2D[:, :, None]
    if dim == 3:
        return levi_civita()
    raise MaterialError(f"Unsupported dimension {dim}.")


def isotropic_tensor(bulk: float, shear: float, skew: float, dim: int) -> np.ndarray:
    """(bulk - 2 shear/d) d_ij d_kl + (shear + skew) d_ik d_jl + (shear - skew) d_il d_jk, flattened."""
    delta = np.eye(dim)
    t = ((bulk - 2.0 * shear / dim) * np.einsum("ij,kl->ijkl", delta, delta)
         + (shear + skew) * np.einsum("ik,jl->ijkl", delta, delta)
         + (shear - skew) * np.einsum("il,jk->ijkl", delta, delta))
    return t.reshape(dim * dim, dim * dim)


def characteristic_length(C: np.ndarray, D: np.ndarray) -> float:
    """ell = sqrt(max D / max C); zero when D vanishes."""
    d_max = float(np.max(D)) if np.size(D) else 0.0
    if d_max <= 0.0:
        return 0.0
    c_max = float(np.max(C))
    if c_max <= 0.0:
        raise MaterialError("Elastic tensor has no positive entry.")
    return math.sqrt(d_max / c_max)


@dataclass(frozen=True)
class CosseratMaterial2D:
    G: float
    nu: float
    a: float
    ell: float
    rho: float = 1.0
    I: float = 1.0

    dim: ClassVar[int] = 2
    n_rot: ClassVar[int] = 1

    def __post_init__(self):
        if self.G <= 0:
            raise MaterialError(f"Shear modulus G must be positive, got {self.G}.")
        if self.nu >= 0.5:
            raise MaterialError(f"Poisson ratio must be < 0.5, got {self.nu}.")
        if self.a < 0:
            raise MaterialError(f"Ratio a must be >= 0, got {self.a}.")
        if self.ell < 0:
            raise MaterialError(f"Characteristic length must be >= 0, got {self.ell}.")
        if self.rho <= 0:
            raise MaterialError(f"Density must be positive, got {self.rho}.")
        if self.I < 0:
            raise MaterialError(f"Micro-inertia must be >= 0, got {self.I}.")

    @property
    def frak_a(self) -> float:
        return 2.0 * (1.0 - self.nu) / (1.0 - 2.0 * self.nu)

    @property
    def frak_b(self) -> float:
        return 2.0 * self.nu / (1.0 - 2.0 * self.nu)

    @property
    def C(self) -> np.ndarray:
        fa, fb, a = self.frak_a, self.frak_b, self.a
        # Law written on (xx, yy, xy, yx), then permuted to row-major order.
        law = self.G * np.array([
            [fa, fb, 0.0, 0.0],
            [fb, fa, 0.0, 0.0],
            [0.0, 0.0, 1.0 + a, 1.0 - a],
            [0.0, 0.0, 1.0 - a, 1.0 + a],
        ])
        perm = [0, 3, 1, 2]
        C = np.zeros((4, 4))
        C[np.ix_(perm, perm)] = law
        return C

    @property
    def D(self) -> np.ndarray:
        return 4.0 * self.G * self.ell ** 2 * np.eye(2)

    @property
    def shear_modulus(self) -> float:
        return self.G

    @property
    def damping_length(self) -> float:
        return self.ell

    def to_dict(self) -> dict:
        return {"G": self.G, "nu": self.nu, "a": self.a, "l": self.ell, "rho": self.rho, "I": self.I}


@dataclass(frozen=True)
class CosseratMaterial3D:
    K: float
    G: float
    Gc: float
    L: float
    M: float
    Mc: float
    rho: float = 1.0
    I: float = 1.0
    ell: float | None = field(default=None)

    dim: ClassVar[int] = 3
    n_rot: ClassVar[int] = 3

    def __post_init__(self):
        if self.K <= 0 or self.G <= 0:
            raise MaterialError(f"K and G must be positive, got K={self.K}, G={self.G}.")
        for name in ("Gc", "L", "M", "Mc"):
            if getattr(self, name) < 0:
                raise MaterialError(f"Modulus {name} must be >= 0, got {getattr(self, name)}.")
        if self.rho <= 0:
            raise MaterialError(f"Density must be positive, got {self.rho}.")
        if self.I < 0:
            raise MaterialError(f"Micro-inertia must be >= 0, got {self.I}.")

    @classmethod
    def from_lame(cls, lam: float, G: float, Gc: float, L: float, M: float, Mc: float,
                  rho: float = 1.0, I: float = 1.0, ell: float | None = None) -> "CosseratMaterial3D":
        return cls(K=lam + 2.0 * G / 3.0, G=G, Gc=Gc, L=L, M=M, Mc=Mc, rho=rho, I=I, ell=ell)

    @property
    def C(self) -> np.ndarray:
        return isotropic_tensor(self.K, self.G, self.Gc, 3)

    @property
    def D(self) -> np.ndarray:
        return isotropic_tensor(self.L, self.M, self.Mc, 3)

    @property
    def shear_modulus(self) -> float:
        return self.G

    @property
    def damping_length(self) -> float:
        return self.ell if self.ell is not None else characteristic_length(self.C, self.D)

    def to_dict(self) -> dict:
        out = {"K": self.K, "G": self.G, "Gc": self.Gc, "L": self.L, "M": self.M, "Mc": self.Mc,
               "rho": self.rho, "I": self.I}
        if self.ell is not None:
            out["l"] = self.ell
        return out


@dataclass(frozen=True)
class StrainState:
    e: np.ndarray  # (n, d, d)
    kappa: np.ndarray  # (n, d) in 2D, (n, 3, 3) in 3D


@dataclass(frozen=True)
class StressState:
    sigma: np.ndarray  # (n, d, d), not symmetric in general
    mu: np.ndarray  # (n, d) in 2D, (n, 3, 3) in 3D


@dataclass(frozen=True)
class StrainOperators:
    """Sparse maps from the dof vector to flattened per-cell e and kappa."""
    E: sp.csr_matrix  # (n_cells * d * d, n_dofs)
    K: sp.csr_matrix  # (n_cells * r * d, n_dofs)
    dim: int
    n_rot: int


def build_strain_operators(n_cells: int, ops: ReconstructionOperators, dim: int, n_rot: int) -> StrainOperators:
    d, r = dim, n_rot
    ndof = d + r
    B = ops.B.tocoo()
    cell_row, j = B.row // d, B.row % d
    eps = permutation_tensor(d)

    e_rows, e_cols, e_vals = [], [], []
    for i in range(d):
        e_rows.append(cell_row * d * d + i * d + j)
        e_cols.append(B.col * ndof + i)
        e_vals.append(B.data)
    ii, jj, kk = np.nonzero(eps)
    cells = np.arange(n_cells)
    for i_, j_, k_ in zip(ii, jj, kk):
        e_rows.append(cells * d * d + i_ * d + j_)
        e_cols.append(cells * ndof + d + k_)
        e_vals.append(np.full(n_cells, eps[i_, j_, k_]))
    E = sp.csr_matrix((np.concatenate(e_vals), (np.concatenate(e_rows), np.concatenate(e_cols))),
                      shape=(n_cells * d * d, n_cells * ndof))

    k_rows, k_cols, k_vals = [], [], []
    for i in range(r):
        k_rows.append(cell_row * r * d + i * d + j)
        k_cols.append(B.col * ndof + d + i)
        k_vals.append(B.data)
    K = sp.csr_matrix((np.concatenate(k_vals), (np.concatenate(k_rows), np.concatenate(k_cols))),
                      shape=(n_cells * r * d, n_cells * ndof))
    return StrainOperators(E=E, K=K, dim=d, n_rot=r)


def strain_from_dofs(ops: ReconstructionOperators, q: np.ndarray, dim: int, n_rot: int,
                     cell: int | None = None) -> StrainState:
    """e_c = G_c(u) + eps.phi_c and kappa_c = G_c(phi), for all cells or a single one."""
    ndof = dim + n_rot
    Q = np.asarray(q, dtype=float).reshape(-1, ndof)
    U, Phi = Q[:, :dim], Q[:, dim:]
    if cell is None:
        grad_u = ops.gradient.apply(U)
        grad_phi = ops.gradient.apply(Phi)
        phi = Phi
    else:
        cg = ops.gradient.cells[cell]
        grad_u = cg.apply(ops.facet.apply(U))[None]
        grad_phi = cg.apply(ops.facet.apply(Phi))[None]
        phi = Phi[cell][None]
    e = grad_u + np.einsum("ijk,ck->cij", permutation_tensor(dim), phi)
    kappa = grad_phi[:, 0, :] if n_rot == 1 else grad_phi
    return StrainState(e=e, kappa=kappa)


def _apply_flat(T: np.ndarray, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = T.shape[0]
    flat = x.reshape(-1, n)
    return (flat @ T.T).reshape(x.shape)


def stress_2d(mat: CosseratMaterial2D, e: np.ndarray) -> np.ndarray:
    return _apply_flat(mat.C, e)


def couple_2d(mat: CosseratMaterial2D, kappa: np.ndarray) -> np.ndarray:
    return 4.0 * mat.G * mat.ell ** 2 * np.asarray(kappa, dtype=float)


def stress_3d(mat: CosseratMaterial3D, e: np.ndarray) -> np.ndarray:
    return _apply_flat(mat.C, e)


def couple_3d(mat: CosseratMaterial3D, kappa: np.ndarray) -> np.ndarray:
    return _apply_flat(mat.D, kappa)


def stress(mat, e: np.ndarray) -> np.ndarray:
    return stress_2d(mat, e) if mat.dim == 2 else stress_3d(mat, e)


def couple(mat, kappa: np.ndarray) -> np.ndarray:
    return couple_2d(mat, kappa) if mat.dim == 2 else couple_3d(mat, kappa)


def stress_state(mat, strain: StrainState) -> StressState:
    return StressState(sigma=stress(mat, strain.e), mu=couple(mat, strain.kappa))


def energy_density(mat, e: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """e:C:e + kappa:D:kappa per entry of the leading axis."""
    d2 = mat.dim * mat.dim
    ef = np.asarray(e, dtype=float).reshape(-1, d2)
    kf = np.asarray(kappa, dtype=float).reshape(ef.shape[0], -1)
    return np.einsum("ni,ij,nj->n", ef, mat.C, ef) + np.einsum("ni,ij,nj->n", kf, mat.D, kf)


def moment_of_stress(sigma: np.ndarray) -> np.ndarray:
    """eps:sigma, i.e. (eps:sigma)_k = eps_kij sigma_ij; scalar sigma_xy - sigma_yx in 2D."""
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[-1]
    if d == 2:
        return sigma[..., 0, 1] - sigma[..., 1, 0]
    return np.einsum("kij,...ij->...k", levi_civita(), sigma)
