import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import StencilError
from mesh import generate_box_mesh
from reconstruction import (barycentric_coords, build_operators, dump_stencils, p1_eval, p1_trace_operator,
                            select_support, stencil_statistics, stencil_table)


def _affine(points, coef, offset):
    return points @ np.asarray(coef) + offset


class TestFacetReconstruction:
    def test_rows_sum_to_one(self, rect_mesh, rect_ops):
        assert_allclose(np.asarray(rect_ops.R.sum(axis=1)).ravel(), 1.0)
        assert rect_ops.R.shape == (rect_mesh.n_facets, rect_mesh.n_cells)

    def test_exact_for_affine_fields(self, rect_mesh, rect_ops):
        v = _affine(rect_mesh.cell_centers, [2.0, -3.0], 0.5)
        assert_allclose(rect_ops.R @ v, _affine(rect_mesh.facet_centers, [2.0, -3.0], 0.5), atol=1e-12)

    def test_exact_on_jittered_mesh(self, jittered_mesh):
        ops = build_operators(jittered_mesh)
        v = _affine(jittered_mesh.cell_centers, [1.5, 0.25], -1.0)
        assert_allclose(ops.R @ v, _affine(jittered_mesh.facet_centers, [1.5, 0.25], -1.0), atol=1e-11)

    def test_stencils_have_d_plus_one_cells(self, rect_mesh, rect_ops):
        for st in rect_ops.facet.stencils:
            assert len(st.cells) == rect_mesh.dim + 1
            assert st.coefficients.sum() == pytest.approx(1.0)

    def test_boundary_supports_need_no_emergency_rounds(self, rect_mesh):
        for f in rect_mesh.boundary_facets:
            support, extra = select_support(rect_mesh, int(f))
            assert extra == 0
            assert len(set(support)) == 3


class TestGradient:
    def test_exact_for_affine_fields(self, jittered_mesh):
        ops = build_operators(jittered_mesh)
        v = _affine(jittered_mesh.cell_centers, [1.5, 0.25], -1.0)
        grad = ops.gradient.apply(v)
        assert_allclose(grad, np.tile([1.5, 0.25], (jittered_mesh.n_cells, 1)), atol=1e-10)

    def test_vector_field_layout(self, rect_mesh, rect_ops):
        # grad[c, i, j] = d_j v_i
        x = rect_mesh.cell_centers
        V = np.column_stack([x[:, 1], 2.0 * x[:, 0]])
        grad = rect_ops.gradient.apply(V)
        assert_allclose(grad, np.tile([[0.0, 1.0], [2.0, 0.0]], (rect_mesh.n_cells, 1, 1)), atol=1e-12)

    def test_constants_have_zero_gradient(self, rect_mesh, rect_ops):
        assert_allclose(rect_ops.gradient.apply(np.full(rect_mesh.n_cells, 7.0)), 0.0, atol=1e-11)

    def test_cell_operator_matches_global(self, rect_mesh, rect_ops):
        v = np.random.default_rng(0).standard_normal(rect_mesh.n_cells)
        full = rect_ops.gradient.apply(v)
        for c in (0, 7, 15):
            local = rect_ops.gradient.cells[c].apply(rect_ops.facet.apply(v))
            assert_allclose(local, full[c], atol=1e-12)

    def test_3d_exactness(self, box_mesh):
        ops = build_operators(box_mesh)
        coef = [1.0, -2.0, 0.5]
        v = _affine(box_mesh.cell_centers, coef, 3.0)
        assert_allclose(ops.R @ v, _affine(box_mesh.facet_centers, coef, 3.0), atol=1e-11)
        assert_allclose(ops.gradient.apply(v), np.tile(coef, (box_mesh.n_cells, 1)), atol=1e-10)

    def test_3d_jittered_exactness(self):
        mesh = generate_box_mesh(1.0, 1.0, 1.0, 3, 3, 3, jitter=0.1, seed=2)
        ops = build_operators(mesh)
        v = _affine(mesh.cell_centers, [0.3, 0.2, -0.7], 0.0)
        assert_allclose(ops.gradient.apply(v), np.tile([0.3, 0.2, -0.7], (mesh.n_cells, 1)), atol=1e-9)


class TestP1Evaluation:
    def test_reproduces_affine_fields(self, rect_mesh, rect_ops):
        v = _affine(rect_mesh.cell_centers, [2.0, 1.0], 0.0)
        pts = np.array([[0.1, 0.05], [0.2, 0.1]])
        assert_allclose(p1_eval(rect_mesh, rect_ops, 0, v, pts), _affine(pts, [2.0, 1.0], 0.0), atol=1e-12)

    def test_value_at_barycenter(self, rect_mesh, rect_ops):
        v = np.random.default_rng(1).standard_normal(rect_mesh.n_cells)
        assert p1_eval(rect_mesh, rect_ops, 3, v, rect_mesh.cell_centers[3]) == pytest.approx(v[3])

    def test_trace_operator_matches_eval(self, rect_mesh, rect_ops):
        v = np.random.default_rng(2).standard_normal(rect_mesh.n_cells)
        cells = np.array([0, 5, 9])
        pts = rect_mesh.cell_centers[cells] + 0.01
        T = p1_trace_operator(rect_mesh, rect_ops, cells, pts)
        expected = [p1_eval(rect_mesh, rect_ops, c, v, x) for c, x in zip(cells, pts)]
        assert_allclose(T @ v, expected, atol=1e-12)


class TestBarycentric:
    def test_coordinates(self):
        alpha = barycentric_coords([[0, 0], [1, 0], [0, 1]], [0.25, 0.25])
        assert_allclose(alpha, [0.5, 0.25, 0.25])

    def test_degenerate_simplex(self):
        with pytest.raises(StencilError, match="Degenerate"):
            barycentric_coords([[0, 0], [1, 1], [2, 2]], [0.5, 0.5])

    def test_wrong_point_count(self):
        with pytest.raises(StencilError):
            barycentric_coords([[0, 0], [1, 0]], [0.5, 0.0])


class TestStencilDiagnostics:
    def test_statistics(self, rect_mesh, rect_ops):
        stats = stencil_statistics(rect_mesh, rect_ops)
        assert stats.emergency_rounds == 0
        assert stats.min_volume_ratio > 0
        assert 0 < stats.locality < 5
        assert set(stats.as_dict()) == {"locality", "min_volume_ratio", "negative_coefficients",
                                        "max_abs_coefficient", "emergency_rounds"}

    def test_table_and_dump(self, rect_mesh, rect_ops, tmp_path):
        table = stencil_table(rect_ops)
        assert len(table) == rect_mesh.n_facets
        assert {"facet", "cell_0", "alpha_0", "cell_2", "alpha_2"} <= set(table.columns)
        path = tmp_path / "stencils.csv"
        dump_stencils(rect_ops, str(path))
        assert path.read_text().startswith("facet")
