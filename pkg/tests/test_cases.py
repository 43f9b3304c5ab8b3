import dataclasses
import os
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from case_runner import RunOptions, run_builtin, run_case
from cases import CASE_MAP, builtin_cases, get_case_class, make_case
from cases.beam_flexion import TIP_PROBE, dt_convergence_study, ramp_traction, youngs_modulus
from cases.boundary_layer import boundary_layer_oracle, oracle_self_convergence
from cases.lamb import SURFACE_PROBE, p_wave_speed, ray_probe_name
from cases.patch_tests import PatchTestCase, condition_table, refinement_study
from cases.plate_hole import PlateHoleCase, hoop_stress, stress_concentration
from errors import CaseError, MeshError
from make_plate_meshes import PLATE_MESHES, plate_hole_mesh, radial_count
from mesh import generate_rect_mesh, label_by_normal
from mesh_io import load_mesh, save_mesh_json
from reconstruction import build_operators
from reporting import error_report
from simulation import build_case_mesh, solve_spec

SMALL_PATCH = {"NX": 8, "NY": 4}


def _hole_on_left(center, normal):
    tag = label_by_normal(center, normal)
    return "hole" if tag == "left" else tag


class TestRegistry:
    def test_lookup(self):
        assert get_case_class("patch2") is PatchTestCase
        with pytest.raises(CaseError, match="not found"):
            get_case_class("nope")

    def test_overrides(self):
        case = make_case("patch1", {"refine": 2}, SMALL_PATCH)
        assert case.params["NX"] == 8 and case.params["G"] == 1.0e3
        assert case.refine == 2
        assert case.name == "patch1"

    def test_all_builtin_specs_build(self):
        cases = builtin_cases()
        assert set(cases) == set(CASE_MAP)
        for name, case in cases.items():
            spec = case.build_spec()
            assert spec.name
            assert spec.mode in ("static", "dynamic")

    def test_invalid_refine(self):
        with pytest.raises(CaseError):
            make_case("patch1", {"refine": 0})

    def test_unknown_phi_mode(self):
        with pytest.raises(CaseError):
            PatchTestCase({"PHI_MODE": "sideways"})


class TestCaseSpec:
    def test_missing_boundary_condition(self):
        spec = make_case("patch1", overrides=SMALL_PATCH).build_spec()
        mesh = build_case_mesh(spec.mesh_source)
        bcs = dict(spec.bcs)
        bcs.pop("top")
        with pytest.raises(CaseError, match="no boundary condition"):
            dataclasses.replace(spec, bcs=bcs).validate(mesh)

    def test_unknown_mode(self):
        spec = make_case("patch1", overrides=SMALL_PATCH).build_spec()
        with pytest.raises(CaseError, match="unknown mode"):
            dataclasses.replace(spec, mode="quasi").validate()

    def test_dynamic_needs_end_time(self):
        spec = make_case("patch1", overrides=SMALL_PATCH).build_spec()
        with pytest.raises(CaseError, match="end time"):
            dataclasses.replace(spec, mode="dynamic").validate()

    def test_refined_mesh(self):
        spec = make_case("patch1", overrides=SMALL_PATCH).build_spec()
        assert build_case_mesh(spec.mesh_source, refine=2).n_cells == 4 * build_case_mesh(spec.mesh_source).n_cells

    def test_unknown_mesh_source(self):
        with pytest.raises(CaseError):
            build_case_mesh({"generator": "sphere"})


class TestPatchTests:
    def test_patch1_is_exact(self):
        case = make_case("patch1", overrides=SMALL_PATCH)
        result = solve_spec(case.build_spec())
        report = error_report(result)
        for name in ("sigma_xx", "sigma_xy", "sigma_yx", "sigma_yy"):
            assert report.components[name].max_rel_error < 1e-6
        assert report.components["sigma_xx"].computed_min == pytest.approx(4.0, rel=1e-6)
        assert report.components["sigma_xy"].computed_max == pytest.approx(1.5, rel=1e-6)
        assert report.l2_errors["u"] < 1e-6
        assert result.balance.interior_max < 1e-8

    def test_patch2_runs(self):
        case = make_case("patch2", overrides=SMALL_PATCH)
        report = error_report(solve_spec(case.build_spec()))
        assert set(case.checks(report)) == {
            "sigma_xx max rel error <= 0.05", "sigma_yy max rel error <= 0.05",
            "sigma_xy max rel error <= 0.05", "sigma_yx max rel error <= 0.05",
            "|mu_x| <= 0.06", "|mu_y| <= 0.06",
        }
        assert np.isfinite(report.components["sigma_xy"].max_rel_error)

    def test_patch3_exact_fields(self):
        case = make_case("patch3", overrides=SMALL_PATCH)
        spec = case.build_spec()
        x = np.array([[0.0, 0.06], [0.1, 0.02]])
        assert spec.expected["mu_x"] == pytest.approx(-4.0 * 0.1 ** 2)
        assert spec.expected["mu_y"] == pytest.approx(4.0 * 0.1 ** 2)
        sigma_xy = spec.expected["sigma_xy"](x)
        assert sigma_xy == pytest.approx(1.5 - (x[:, 0] - x[:, 1]))
        assert spec.body.couple(x, 0.0) == pytest.approx(2.0 * (x[:, 1] - x[:, 0]))
        assert spec.body.force(x, 0.0)[0] == pytest.approx([-1.0, -1.0])

    def test_patch2_loads(self):
        spec = make_case("patch2", overrides=SMALL_PATCH).build_spec()
        x = np.array([[0.0, 0.06]])
        assert spec.body.force(x, 0.0)[0] == pytest.approx([0.0, 0.0])
        assert spec.body.couple(x, 0.0) == pytest.approx([-1.0])

    def test_run_case_writes_report(self, tmp_path):
        case = make_case("patch1", overrides=SMALL_PATCH)
        options = RunOptions(output_dir=str(tmp_path), emit=["report", "csv"], save_plots=False)
        report, artifacts = run_case(case.build_spec(), options, case)
        assert report.passed
        assert os.path.exists(artifacts["report"])
        assert os.path.exists(artifacts["cells"])
        cells = pd.read_csv(artifacts["cells"])
        assert {"u_x", "u_y", "phi", "sigma_xy", "mu_x"} <= set(cells.columns)

    def test_unknown_emit_target(self):
        with pytest.raises(CaseError, match="emit"):
            RunOptions(emit=["pdf"])

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["patch1", "patch2", "patch3"])
    def test_full_size_checks(self, name, tmp_path):
        reports = run_builtin(name, RunOptions(output_dir=str(tmp_path), emit=["report"], save_plots=False))
        assert all(r.passed for r in reports)

    @pytest.mark.slow
    def test_refinement_and_conditioning(self):
        case = make_case("patch2", overrides=SMALL_PATCH)
        study = refinement_study(case, levels=(1, 2, 4))
        errors = study["sigma_xy"].to_numpy()
        assert errors[-1] <= errors[0] + 1e-10
        table = condition_table([make_case(n, overrides=SMALL_PATCH) for n in ("patch1", "patch2", "patch3")])
        assert (table["ratio"] < 10.0).all()


class TestBoundaryLayer:
    def test_oracle_linear_without_coupling(self):
        y, u, phi = boundary_layer_oracle(1.0, 0.0, 0.1, -0.1, 0.01, n=101)
        assert u == pytest.approx(-0.1 * y, abs=1e-12)
        assert phi == pytest.approx(0.01 * y, abs=1e-12)

    def test_oracle_boundary_values(self):
        y, u, phi = boundary_layer_oracle(1.0e-3, 2.0, 5.0e-5, -0.1, 1.0e-5, n=2001)
        assert y[0] == 0.0 and y[-1] == pytest.approx(1.0e-3)
        assert u[0] == 0.0 and u[-1] == -0.1
        assert phi[0] == 0.0 and phi[-1] == 1.0e-5
        assert np.all(np.isfinite(u)) and np.all(np.isfinite(phi))

    def test_oracle_self_convergence(self):
        assert oracle_self_convergence(1.0e-3, 2.0, 5.0e-5, -0.1, 1.0e-5, n=10000) < 1e-3

    def test_oracle_grid_too_small(self):
        with pytest.raises(CaseError):
            boundary_layer_oracle(1.0, 1.0, 0.1, 1.0, 0.0, n=3)

    def test_spec(self):
        spec = make_case("boundary_layer").build_spec()
        assert spec.dirichlet_tags == {"left", "right", "bottom", "top"}
        assert not spec.bcs["left"].constrain_rotation
        assert spec.metadata["phi_top"] == pytest.approx(1.0e-5)
        assert (spec.mesh_source["nx"], spec.mesh_source["ny"]) == (10, 50)

    @pytest.mark.slow
    def test_full_run(self, tmp_path):
        reports = run_builtin("boundary_layer",
                              RunOptions(output_dir=str(tmp_path), emit=["report"], save_plots=False))
        assert reports[0].passed


class TestPlateHole:
    def test_stress_concentration(self):
        mesh = generate_rect_mesh(1.0, 0.1, 10, 4, origin=(1.0, -0.05), labeler=_hole_on_left)
        ops = build_operators(mesh)
        sigma = np.zeros((mesh.n_cells, 2, 2))
        sigma[:, 1, 1] = 3.0
        assert stress_concentration(mesh, ops, sigma, 1.0) == pytest.approx(3.0, rel=1e-12)
        with pytest.raises(CaseError):
            stress_concentration(mesh, ops, sigma, 0.0)

    def test_linear_stress_extrapolated_to_the_hole(self):
        mesh = generate_rect_mesh(1.0, 0.1, 10, 4, origin=(1.0, -0.05), labeler=_hole_on_left)
        ops = build_operators(mesh)
        sigma = np.zeros((mesh.n_cells, 2, 2))
        sigma[:, 1, 1] = 3.0 - 2.0 * (mesh.cell_centers[:, 0] - 1.0)
        assert sigma[:, 1, 1].max() < 3.0 - 1e-3
        angles, hoop = hoop_stress(mesh, ops, sigma)
        assert_allclose(hoop, 3.0, rtol=1e-9)
        assert len(hoop) == 4
        assert np.all(np.abs(angles) < 0.1)

    def test_missing_hole_tag(self, rect_mesh, rect_ops):
        with pytest.raises(CaseError, match="hole"):
            stress_concentration(rect_mesh, rect_ops, np.zeros((rect_mesh.n_cells, 2, 2)), 1.0)

    @pytest.mark.parametrize("test, size, swept", [(1, 5, "A"), (2, 5, "A"), (3, 7, "R_OVER_ELL")])
    def test_sweeps(self, test, size, swept):
        entries = make_case("plate_hole", overrides={"TEST": test}).sweep()
        assert len(entries) == size
        assert len({e[swept] for e in entries}) == size

    def test_unknown_sweep(self):
        with pytest.raises(CaseError, match="unknown sweep"):
            make_case("plate_hole", overrides={"TEST": 9}).sweep()

    def test_missing_mesh_file(self, tmp_path):
        case = make_case("plate_hole")
        with pytest.raises(CaseError, match="not found"):
            case.build_spec({"MESH_FILE": str(tmp_path / "missing.json")})

    def test_unknown_mesh_level(self):
        with pytest.raises(CaseError, match="mesh level"):
            make_case("plate_hole").build_spec({"MESH_LEVEL": "medium"})

    @pytest.mark.parametrize("test, level", [(1, "fine"), (1, "ci"), (3, "fine"), (3, "ci")])
    def test_shipped_meshes_load(self, test, level):
        spec = make_case("plate_hole", overrides={"TEST": test}).build_spec({"MESH_LEVEL": level})
        mesh = build_case_mesh(spec.mesh_source)
        assert mesh.tags == {"hole", "left", "right", "bottom", "top"}
        spec.validate(mesh)
        radius, half = spec.metadata["radius"], 16.2e-3
        n_hole = len(mesh.facets_with_tag("hole"))
        polygon = 0.5 * radius ** 2 * n_hole * np.sin(0.5 * np.pi / n_hole)
        assert mesh.cell_volumes.sum() == pytest.approx(half ** 2 - polygon, rel=1e-10)

    def test_shipped_ci_mesh_matches_writer(self):
        radius, n_theta, n_radial = PLATE_MESHES["plate_hole_r0864_ci.json"]
        expected = plate_hole_mesh(16.2e-3, radius, n_theta, n_radial)
        spec = make_case("plate_hole", overrides={"TEST": 3}).build_spec({"MESH_LEVEL": "ci"})
        shipped = build_case_mesh(spec.mesh_source)
        assert shipped.cell_vertices == expected.cell_vertices
        assert_allclose(shipped.vertices, expected.vertices, rtol=1e-12, atol=1e-18)
        for tag in ("hole", "left", "right", "bottom", "top"):
            assert_array_equal(shipped.facets_with_tag(tag), expected.facets_with_tag(tag))

    def test_writer_rejects_bad_input(self):
        with pytest.raises(MeshError):
            plate_hole_mesh(1.0, 0.1, 7)
        with pytest.raises(MeshError):
            plate_hole_mesh(1.0, 2.0, 8)
        assert radial_count(16.2e-3, 0.216e-3, 96) == 264

    def test_writer_round_trip(self, tmp_path):
        mesh = plate_hole_mesh(1.0, 0.25, 8)
        path = str(tmp_path / "plate.json")
        save_mesh_json(mesh, path)
        loaded = load_mesh(path)
        assert loaded.n_cells == mesh.n_cells == 2 * 8 * radial_count(1.0, 0.25, 8)
        assert loaded.tags == mesh.tags

    def test_sweep_checks(self):
        case = PlateHoleCase({"SWEEPS": {1: {"RADIUS": 1.0, "R_OVER_ELL": [1.0], "A": [0.0], "EXPECTED": [3.0]}}})
        table = pd.DataFrame({"a": [0.0, 1.0, 2.0], "stress concentration": [3.0, 2.5, 2.2]})
        assert case.sweep_checks(table) == {"concentration decreases with a": True}
        table["stress concentration"] = [3.0, 2.5, 2.6]
        assert case.sweep_checks(table) == {"concentration decreases with a": False}

    def test_checks_use_level_tolerance(self):
        case = make_case("plate_hole")
        assert case.checks(SimpleNamespace(metrics={"mesh": "ci", "concentration rel error": 0.04})) == {
            "stress concentration within 5%": True}
        assert case.checks(SimpleNamespace(metrics={"mesh": "fine", "concentration rel error": 0.04})) == {
            "stress concentration within 2%": False}

    def test_ci_mesh_classical_concentration(self, tmp_path):
        case = make_case("plate_hole")
        spec = case.build_spec({"MESH_LEVEL": "ci", "A": 0.0, "EXPECTED": 3.0})
        report, _ = run_case(spec, RunOptions(output_dir=str(tmp_path), emit=["report"], save_plots=False), case)
        assert report.metrics["mesh"] == "ci"
        assert report.passed

    @pytest.mark.slow
    @pytest.mark.parametrize("test", [1, 2, 3])
    def test_sweep_on_fine_mesh(self, test, tmp_path):
        options = RunOptions(output_dir=str(tmp_path), emit=["report"], save_plots=False, threads=2)
        reports = run_builtin("plate_hole", options, overrides={"TEST": test})
        assert all(r.passed for r in reports)


class TestBeamFlexion:
    def test_youngs_modulus(self):
        assert youngs_modulus(16.67e9, 10.0e9) == pytest.approx(25.0e9, rel=1e-3)

    def test_ramp(self):
        g = ramp_traction(2.0e10, 1.0e-8)
        assert g(np.zeros((1, 3)), 0.5e-8) == pytest.approx([0.0, -1.0e4, 0.0])
        assert g(np.zeros((1, 3)), 1.0e-8)[1] == pytest.approx(-2.0e4)
        assert not g(np.zeros((1, 3)), 2.0e-8).any()

    def test_spec(self):
        spec = make_case("beam_flexion").build_spec()
        mat = spec.material
        ell = 1.0e-5
        assert mat.ell == pytest.approx(ell)
        assert mat.L == pytest.approx(10.0e9 * ell ** 2)
        assert mat.M == pytest.approx(2.5 * 10.0e9 * ell ** 2)
        assert mat.I == pytest.approx(0.4 * ell ** 2)
        assert spec.dt == pytest.approx(6.3e-5 / 2000)
        assert spec.bcs["left"].is_dirichlet and not spec.bcs["right"].is_dirichlet

    def test_short_run(self):
        case = make_case("beam_flexion", overrides={"NX": 4, "NY": 1, "NZ": 1, "STEPS": 20, "T_FRACTION": 0.01})
        result = solve_spec(case.build_spec())
        tip = result.trajectory.probes[TIP_PROBE]
        assert len(tip) == 21
        assert np.all(np.isfinite(tip))
        assert np.all(np.isfinite(result.trajectory.energies))

    def test_many_steps_stay_bounded(self):
        case = make_case("beam_flexion", overrides={"NX": 8, "NY": 1, "NZ": 1, "STEPS": 200, "T_FRACTION": 0.1})
        result = solve_spec(case.build_spec())
        metrics = case.postprocess(result)
        assert metrics["steps"] == 200
        assert metrics["finite"]
        assert all(case.checks(SimpleNamespace(metrics=metrics)).values())

    @pytest.mark.slow
    def test_dt_convergence(self):
        case = make_case("beam_flexion", overrides={"NX": 8, "NY": 1, "NZ": 1})
        study = dt_convergence_study(case, steps=(100, 200, 400), fraction=0.05)
        diffs = study["linf_diff_to_previous"].to_numpy()[1:]
        assert diffs[1] <= diffs[0]


class TestLamb:
    def test_wave_speed_formula(self):
        assert p_wave_speed(3.76e9, 7.52e9, 2500.0) == pytest.approx(np.sqrt(18.8e9 / 2500.0))

    def test_spec(self):
        spec = make_case("lamb_desk").build_spec()
        names = [probe.name for probe in spec.probes]
        assert names == [ray_probe_name(200.0), ray_probe_name(500.0), SURFACE_PROBE]
        assert names[:2] == ["ray_200", "ray_500"]
        assert spec.mode == "dynamic"
        assert not spec.dirichlet_tags
        assert spec.material.ell == pytest.approx(20.0 / np.sqrt(2.0))
        assert spec.material.a == pytest.approx(1.0)

    def test_source_below_surface(self):
        spec = make_case("lamb_desk").build_spec()
        x = np.array([spec.metadata["source"], [0.0, 0.0]])
        f = spec.body.force(x, 0.1)
        assert f[0, 1] > 0.0
        assert not f[1].any()

    @pytest.mark.slow
    def test_full_run(self, tmp_path):
        reports = run_builtin("lamb_desk", RunOptions(output_dir=str(tmp_path), emit=["report"], save_plots=False))
        assert reports[0].passed
