import os

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from numpy.testing import assert_allclose

from errors import AssemblyError
from material import CosseratMaterial2D
from mesh import facet_classification
from system import (BodyLoads, BoundaryCondition, DofMap, assemble_damping, assemble_elastic, assemble_inner_penalty,
                    assemble_load, assemble_mass, assemble_nitsche, assemble_system, compose_system,
                    constraint_projectors, evaluate_field, export_matrices)
from tests.conftest import rigid_dofs, rigid_motion_2d

TAGS = ("left", "right", "bottom", "top")


def _clamped(tags=("bottom",)):
    bcs = {tag: BoundaryCondition(tag, "neumann") for tag in TAGS}
    bcs.update({tag: BoundaryCondition(tag, "dirichlet") for tag in tags})
    return bcs


def _rel(vec, mat, q):
    return np.linalg.norm(vec) / (spla.norm(mat) * np.linalg.norm(q))


class TestDofMap:
    def test_layout(self):
        dm = DofMap(n_cells=3, dim=2, n_rot=1)
        assert dm.per_cell == 3
        assert dm.n_dofs == 9
        assert dm.u(2, 1) == 7
        assert dm.phi(1) == 5
        U, Phi = dm.split(np.arange(9.0))
        assert_allclose(U, [[0, 1], [3, 4], [6, 7]])
        assert_allclose(dm.join(U, Phi), np.arange(9.0))

    def test_selector(self):
        dm = DofMap(n_cells=2, dim=3, n_rot=3)
        q = np.arange(12.0)
        assert_allclose(dm.selector(4) @ q, [4.0, 10.0])


class TestBilinearForms:
    def test_elastic_matrix_is_symmetric(self, rect_mesh, mat2d, rect_ops):
        K = assemble_elastic(rect_mesh, mat2d, rect_ops)
        assert K.shape == (48, 48)
        assert abs(K - K.T).max() < 1e-9 * abs(K).max()

    def test_rigid_motion_in_kernel(self, rect_mesh, mat2d, rect_ops):
        u, phi = rigid_motion_2d(rect_mesh.cell_centers, 1.0, x0=(0.5, 0.25))
        q = np.column_stack([u, phi]).ravel()
        K = assemble_elastic(rect_mesh, mat2d, rect_ops) + assemble_inner_penalty(rect_mesh, mat2d, rect_ops)
        assert _rel(K @ q, K, q) < 1e-12

    def test_translation_in_kernel(self, rect_mesh, mat2d, rect_ops):
        q = np.tile([1.0, -2.0, 0.0], rect_mesh.n_cells)
        K = assemble_elastic(rect_mesh, mat2d, rect_ops) + assemble_inner_penalty(rect_mesh, mat2d, rect_ops)
        assert _rel(K @ q, K, q) < 1e-12

    def test_penalty_vanishes_on_affine_fields(self, rect_mesh, mat2d, rect_ops):
        x = rect_mesh.cell_centers
        q = np.column_stack([x[:, 0] + 2.0 * x[:, 1], -x[:, 0], 0.5 * x[:, 1]]).ravel()
        K_pen = assemble_inner_penalty(rect_mesh, mat2d, rect_ops)
        assert_allclose(K_pen @ q, 0.0, atol=1e-9)
        assert abs(K_pen - K_pen.T).max() < 1e-9 * abs(K_pen).max()

    def test_penalty_positive_on_a_kink(self, rect_mesh, mat2d, rect_ops):
        x = rect_mesh.cell_centers
        q = np.column_stack([np.abs(x[:, 0] - 0.5), np.zeros(len(x)), np.zeros(len(x))]).ravel()
        K_pen = assemble_inner_penalty(rect_mesh, mat2d, rect_ops)
        assert q @ K_pen @ q > 0


class TestNitsche:
    def test_nonsymmetric_pair(self, rect_mesh, mat2d, rect_ops):
        partition = facet_classification(rect_mesh, {"bottom", "left"})
        bcs = _clamped(("bottom", "left"))
        K_con, K_nsym, rhs = assemble_nitsche(rect_mesh, mat2d, rect_ops, partition, bcs)
        assert abs(K_nsym + K_con.T).max() <= 1e-14 * abs(K_con).max()
        assert K_con.nnz > 0
        assert_allclose(rhs, 0.0)

    def test_symmetric_part_of_stiffness(self, rect_mesh, mat2d, rect_ops):
        partition = facet_classification(rect_mesh, {"bottom"})
        parts = assemble_system(rect_mesh, mat2d, rect_ops, partition, _clamped())
        A = parts.stiffness()
        sym = 0.5 * (A + A.T)
        assert abs(sym - (parts.K_elas + parts.K_pen)).max() < 1e-9 * abs(A).max()

    def test_no_dirichlet_facets(self, rect_mesh, mat2d, rect_ops, neumann_partition):
        K_con, K_nsym, rhs = assemble_nitsche(rect_mesh, mat2d, rect_ops, neumann_partition, {})
        assert K_con.nnz == 0 and K_nsym.nnz == 0
        assert not rhs.any()

    def test_affine_data_rhs_matches_trace(self, rect_mesh, mat2d, rect_ops):
        # For affine u_D the facet integral equals |F| u_D(x_F), which R reproduces.
        partition = facet_classification(rect_mesh, {"bottom"})
        u_D = lambda x, t: np.column_stack([x[:, 0], 2.0 * x[:, 0]])  # noqa: E731
        bcs = _clamped()
        bcs["bottom"] = BoundaryCondition("bottom", "dirichlet", displacement=u_D)
        K_con, K_nsym, rhs = assemble_nitsche(rect_mesh, mat2d, rect_ops, partition, bcs)
        x = rect_mesh.cell_centers
        q = np.column_stack([x[:, 0], 2.0 * x[:, 0], np.zeros(len(x))]).ravel()
        assert_allclose(rhs, K_nsym @ q, atol=1e-9 * np.abs(rhs).max())

    def test_missing_boundary_data(self, rect_mesh, mat2d, rect_ops):
        partition = facet_classification(rect_mesh, {"bottom"})
        with pytest.raises(AssemblyError, match="no boundary data"):
            assemble_nitsche(rect_mesh, mat2d, rect_ops, partition, {"top": BoundaryCondition("top")})


class TestConstraints:
    def test_projectors(self):
        normals = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, -1.0]])
        bcs = [BoundaryCondition("a", constrain="normal"),
               BoundaryCondition("b", constrain="tangential", constrain_rotation=False),
               BoundaryCondition("c", constrain=(1.0, 0.0))]
        Pu, Pr = constraint_projectors(normals, bcs, 2, 1)
        assert_allclose(Pu[0], [[0.0, 0.0], [0.0, 1.0]])
        assert_allclose(Pu[1], [[0.0, 0.0], [0.0, 1.0]])
        assert_allclose(Pu[2], [[1.0, 0.0], [0.0, 0.0]])
        assert_allclose(Pr[:, 0, 0], [1.0, 0.0, 1.0])

    def test_bad_mask(self):
        with pytest.raises(AssemblyError, match="component mask"):
            constraint_projectors(np.array([[1.0, 0.0]]), [BoundaryCondition("a", constrain=(1, 0, 0))], 2, 1)

    def test_bad_kind_and_mode(self):
        with pytest.raises(AssemblyError, match="unknown kind"):
            BoundaryCondition("a", kind="robin")
        with pytest.raises(AssemblyError, match="unknown constraint"):
            BoundaryCondition("a", constrain="sliding")


class TestMassAndDamping:
    def test_mass(self, rect_mesh):
        mat = CosseratMaterial2D(G=1.0, nu=0.25, a=0.5, ell=0.1, rho=2.0, I=0.5)
        M = assemble_mass(rect_mesh, mat)
        assert M.shape == (48,)
        assert M[0::3].sum() == pytest.approx(2.0 * 0.5)
        assert M[2::3].sum() == pytest.approx(2.0 * 0.5 * 0.5)

    def test_damping_only_on_dirichlet_cells(self, rect_mesh, mat2d, neumann_partition):
        assert not assemble_damping(rect_mesh, mat2d, neumann_partition).diagonal().any()
        partition = facet_classification(rect_mesh, {"bottom"})
        C = assemble_damping(rect_mesh, mat2d, partition).diagonal()
        cells = np.unique(rect_mesh.facet_cells[partition.dirichlet, 0])
        touched = np.flatnonzero(C[0::3])
        assert_allclose(np.sort(touched), np.sort(cells))
        assert np.all(C >= 0)


class TestLoads:
    def test_body_force_integral(self, rect_mesh):
        dm = DofMap(rect_mesh.n_cells, 2, 1)
        body = BodyLoads(force=lambda x, t: np.array([1.0, 2.0]), couple=lambda x, t: x[:, 0])
        rhs = assemble_load(rect_mesh, dm, body)
        assert rhs[0::3].sum() == pytest.approx(0.5)
        assert rhs[1::3].sum() == pytest.approx(1.0)
        assert rhs[2::3].sum() == pytest.approx(0.25)

    def test_traction_integral(self, rect_mesh, neumann_partition):
        dm = DofMap(rect_mesh.n_cells, 2, 1)
        bcs = {tag: BoundaryCondition(tag, "neumann") for tag in TAGS}
        bcs["top"] = BoundaryCondition("top", "neumann", traction=lambda x, t: np.array([0.0, -3.0 * (1.0 + t)]),
                                       couple=lambda x, t: 1.0)
        rhs = assemble_load(rect_mesh, dm, None, neumann_partition, bcs, t=1.0)
        assert rhs[1::3].sum() == pytest.approx(-6.0)
        assert rhs[2::3].sum() == pytest.approx(1.0)
        top_cells = rect_mesh.facet_cells[rect_mesh.facets_with_tag("top"), 0]
        assert set(np.flatnonzero(rhs[1::3])) == set(top_cells)

    def test_evaluate_field_shapes(self):
        x = np.zeros((4, 2))
        assert evaluate_field(None, x, 0.0, 2).shape == (4, 2)
        assert_allclose(evaluate_field(lambda x, t: 3.0, x, 0.0, 1), 3.0)
        assert evaluate_field(lambda x, t: x[:, 0], x, 0.0, 1).shape == (4, 1)
        assert_allclose(evaluate_field(lambda x, t: np.array([1.0, 2.0]), x, 0.0, 2)[3], [1.0, 2.0])


class TestComposition:
    def test_static_composition(self, rect_mesh, mat2d, rect_ops):
        partition = facet_classification(rect_mesh, {"bottom"})
        parts = assemble_system(rect_mesh, mat2d, rect_ops, partition, _clamped())
        A, b = compose_system(parts)
        assert A.shape == (48, 48)
        assert_allclose(b, parts.rhs_load + parts.rhs_nsym)
        A_nopen, _ = compose_system(parts, include_penalty=False)
        assert abs(A - A_nopen - parts.K_pen).max() < 1e-12 * abs(A).max()

    def test_dynamic_composition(self, rect_mesh, mat2d, rect_ops):
        partition = facet_classification(rect_mesh, {"bottom"})
        parts = assemble_system(rect_mesh, mat2d, rect_ops, partition, _clamped(), dynamic=True)
        system = compose_system(parts, "dynamic")
        assert system.C.nnz > 0
        assert abs(system.K_sym - parts.K_elas - parts.K_pen).max() <= 1e-14 * abs(system.K_sym).max()
        assert system.load_at(0.0).shape == (48,)

    def test_shape_mismatch(self, rect_mesh, mat2d, rect_ops, neumann_partition):
        parts = assemble_system(rect_mesh, mat2d, rect_ops, neumann_partition, _clamped(()))
        parts.M = parts.M[:-1]
        with pytest.raises(AssemblyError, match="M has shape"):
            compose_system(parts)

    def test_unknown_mode(self, rect_mesh, mat2d, rect_ops, neumann_partition):
        parts = assemble_system(rect_mesh, mat2d, rect_ops, neumann_partition, _clamped(()))
        with pytest.raises(AssemblyError, match="Unknown mode"):
            compose_system(parts, "modal")

    def test_export(self, rect_mesh, mat2d, rect_ops, tmp_path):
        partition = facet_classification(rect_mesh, {"bottom"})
        parts = assemble_system(rect_mesh, mat2d, rect_ops, partition, _clamped())
        written = export_matrices(parts, str(tmp_path / "matrices"))
        names = {os.path.basename(p) for p in written}
        assert {"K_elas.mtx", "K_nsym.mtx", "M.txt", "rhs_nsym.txt"} <= names
        assert all(os.path.exists(p) for p in written)


def _all_tags(mesh, dirichlet=("bottom",)):
    bcs = {tag: BoundaryCondition(tag, "neumann") for tag in mesh.tags}
    bcs.update({tag: BoundaryCondition(tag, "dirichlet") for tag in dirichlet})
    return bcs


class TestInvariantsAcrossDimensions:
    def test_stiffness_symmetric_positive_semidefinite(self, dem_setup):
        mesh, mat, ops = dem_setup
        K = (assemble_elastic(mesh, mat, ops) + assemble_inner_penalty(mesh, mat, ops)).toarray()
        scale = np.abs(K).max()
        assert np.abs(K - K.T).max() < 1e-9 * scale
        assert np.linalg.eigvalsh(0.5 * (K + K.T)).min() > -1e-9 * scale

    def test_rigid_motion_in_kernel(self, dem_setup):
        mesh, mat, ops = dem_setup
        q = rigid_dofs(mesh, mat)
        K = assemble_elastic(mesh, mat, ops) + assemble_inner_penalty(mesh, mat, ops)
        assert _rel(K @ q, K, q) < 1e-10

    def test_nitsche_pair_is_transposed(self, dem_setup):
        mesh, mat, ops = dem_setup
        partition = facet_classification(mesh, {"bottom"})
        parts = assemble_system(mesh, mat, ops, partition, _all_tags(mesh))
        assert parts.K_con.nnz > 0
        assert abs(parts.K_nsym + parts.K_con.T).max() <= 1e-14 * abs(parts.K_con).max()
        A = parts.stiffness()
        sym = 0.5 * (A + A.T)
        assert abs(sym - (parts.K_elas + parts.K_pen)).max() < 1e-9 * abs(A).max()

    def test_system_reuses_standalone_nitsche(self, dem_setup):
        mesh, mat, ops = dem_setup
        partition = facet_classification(mesh, {"bottom"})
        bcs = _all_tags(mesh)
        parts = assemble_system(mesh, mat, ops, partition, bcs)
        K_con, K_nsym, rhs = assemble_nitsche(mesh, mat, ops, partition, bcs)
        assert abs(parts.K_con - K_con).max() <= 1e-14 * abs(K_con).max()
        assert abs(parts.K_nsym - K_nsym).max() <= 1e-14 * abs(K_nsym).max()
        assert_allclose(parts.rhs_nsym, rhs)

    def test_mass_is_positive(self, dem_setup):
        mesh, mat, _ = dem_setup
        M = assemble_mass(mesh, mat)
        assert M.shape == (mesh.n_cells * (mat.dim + mat.n_rot),)
        assert np.all(M > 0)
        per_cell = M.reshape(mesh.n_cells, -1)
        assert per_cell[:, 0].sum() == pytest.approx(mat.rho * mesh.cell_volumes.sum())
