import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import trapezoid

from errors import ProbeError
from mesh import cell_quadrature, generate_rect_mesh
from probes import (Probe, arrival_time, mollifier_mass, peak_time, probe_functionals, ricker_amplitude,
                    ricker_source, wave_speed_probe, write_timeseries)
from reconstruction import build_operators
from solver import Trajectory
from system import DofMap


def _pulse_trajectory(distances: dict, speed: float, width: float = 0.01) -> Trajectory:
    times = np.linspace(0.0, 1.0, 10001)
    probes = {name: np.exp(-((times - 0.1 - d / speed) / width) ** 2) for name, d in distances.items()}
    return Trajectory(times=times, energies=np.zeros_like(times), probes=probes)


class TestRicker:
    def test_peak_and_decay(self):
        assert ricker_amplitude(0.1, 14.5, 0.1) == pytest.approx(1.0)
        assert abs(ricker_amplitude(0.6, 14.5, 0.1)) < 1e-12

    def test_zero_mean(self):
        t = np.linspace(0.0, 0.2, 20001)
        assert abs(trapezoid(ricker_amplitude(t, 14.5, 0.1), t)) < 1e-6

    def test_zero_crossings(self):
        # 1 - 2 (pi f tau)^2 = 0
        tau = 1.0 / (np.sqrt(2.0) * np.pi * 14.5)
        assert ricker_amplitude(0.1 + tau, 14.5, 0.1) == pytest.approx(0.0, abs=1e-12)


class TestSource:
    def test_mollifier_mass(self):
        assert mollifier_mass(3.0, 2) == pytest.approx(3.0 * np.pi)
        assert mollifier_mass(1.0, 3) == pytest.approx(32.0 * np.pi / 105.0)
        with pytest.raises(ProbeError):
            mollifier_mass(1.0, 1)

    def test_force_integrates_to_amplitude(self):
        mesh = generate_rect_mesh(2.0, 2.0, 40, 40, origin=(-1.0, -1.0))
        quad = cell_quadrature(mesh)
        force = ricker_source(14.5, 0.1, (0.0, 0.0), 0.5, amplitude=2.0)
        f = force(quad.points, 0.1)
        assert (quad.weights * f[:, 1]).sum() == pytest.approx(2.0, rel=0.01)
        assert_allclose(f[:, 0], 0.0)

    def test_force_vanishes_outside_radius(self):
        force = ricker_source(14.5, 0.1, (0.0, 0.0), 0.5, direction=(1.0, 0.0))
        f = force(np.array([[0.6, 0.0], [0.0, 0.0]]), 0.1)
        assert_allclose(f[0], 0.0)
        assert f[1, 0] == pytest.approx(1.0 / mollifier_mass(0.5, 2))

    def test_3d_default_direction_is_vertical(self):
        force = ricker_source(10.0, 0.0, (0.0, 0.0, 0.0), 1.0)
        f = force(np.zeros((1, 3)), 0.0)
        assert f[0, 2] > 0 and f[0, 0] == 0.0 and f[0, 1] == 0.0

    def test_invalid_parameters(self):
        with pytest.raises(ProbeError):
            ricker_source(0.0, 0.1, (0.0, 0.0), 1.0)
        with pytest.raises(ProbeError):
            ricker_source(10.0, 0.1, (0.0, 0.0), 0.0)


class TestProbeSampling:
    def test_unknown_field(self):
        with pytest.raises(ProbeError, match="unknown field"):
            Probe("p", (0.0, 0.0), field="sigma")

    def test_exact_for_affine_fields(self, rect_mesh, rect_ops):
        dm = DofMap(rect_mesh.n_cells, 2, 1)
        x = rect_mesh.cell_centers
        q = dm.join(np.column_stack([x[:, 0], 3.0 * x[:, 1] - x[:, 0]]), 2.0 * x[:, 0] + 1.0)
        probes = [Probe("uy", (0.3, 0.2), "u", 1), Probe("phi", (0.7, 0.4), "phi", 0)]
        fns = probe_functionals(rect_mesh, rect_ops, dm, probes)
        assert fns["uy"](q) == pytest.approx(3.0 * 0.2 - 0.3)
        assert fns["phi"](q) == pytest.approx(2.0 * 0.7 + 1.0)

    def test_3d_probe(self, box_mesh):
        ops = build_operators(box_mesh)
        dm = DofMap(box_mesh.n_cells, 3, 3)
        x = box_mesh.cell_centers
        q = dm.join(np.column_stack([x[:, 2], x[:, 0], x[:, 1]]), np.zeros((box_mesh.n_cells, 3)))
        fns = probe_functionals(box_mesh, ops, dm, [Probe("uz", (0.3, 0.6, 0.2), "u", 2)])
        assert fns["uz"](q) == pytest.approx(0.6)

    def test_component_out_of_range(self, rect_mesh, rect_ops):
        dm = DofMap(rect_mesh.n_cells, 2, 1)
        with pytest.raises(ProbeError, match="out of range"):
            probe_functionals(rect_mesh, rect_ops, dm, [Probe("p", (0.5, 0.25), "phi", 1)])

    def test_dimension_mismatch(self, rect_mesh, rect_ops):
        dm = DofMap(rect_mesh.n_cells, 2, 1)
        with pytest.raises(ProbeError, match="dimension"):
            probe_functionals(rect_mesh, rect_ops, dm, [Probe("p", (0.5, 0.25, 0.0))])

    def test_no_probes(self, rect_mesh, rect_ops):
        assert probe_functionals(rect_mesh, rect_ops, DofMap(rect_mesh.n_cells, 2, 1), []) == {}


class TestArrivals:
    def test_first_arrival_and_peak(self):
        times = np.arange(6.0)
        values = np.array([0.0, 0.0, 0.01, -0.2, 1.0, 0.5])
        assert arrival_time(times, values) == 3.0
        assert arrival_time(times, values, threshold=0.005) == 2.0
        assert peak_time(times, values) == 4.0

    def test_silent_probe(self):
        with pytest.raises(ProbeError, match="no arrival"):
            arrival_time(np.arange(3.0), np.zeros(3))
        with pytest.raises(ProbeError, match="no arrival"):
            peak_time(np.arange(3.0), np.zeros(3))

    def test_wave_speed(self):
        traj = _pulse_trajectory({"near": 200.0, "far": 500.0}, speed=3000.0)
        result = wave_speed_probe(traj, {"near": 200.0, "far": 500.0})
        assert result.speed == pytest.approx(3000.0, rel=0.01)
        assert result.arrivals["near"] < result.arrivals["far"]

    def test_wave_speed_least_squares(self):
        distances = {"a": 100.0, "b": 250.0, "c": 400.0}
        result = wave_speed_probe(_pulse_trajectory(distances, speed=2000.0), distances)
        assert result.speed == pytest.approx(2000.0, rel=0.01)

    def test_wave_speed_errors(self):
        traj = _pulse_trajectory({"near": 200.0}, speed=3000.0)
        with pytest.raises(ProbeError, match="at least two"):
            wave_speed_probe(traj, {"near": 200.0})
        with pytest.raises(ProbeError, match="not recorded"):
            wave_speed_probe(traj, {"near": 200.0, "far": 500.0})
        same = _pulse_trajectory({"a": 200.0, "b": 200.0}, speed=3000.0)
        with pytest.raises(ProbeError, match="do not separate"):
            wave_speed_probe(same, {"a": 200.0, "b": 400.0})


class TestTimeseriesOutput:
    def test_write(self, tmp_path):
        traj = _pulse_trajectory({"near": 200.0}, speed=3000.0)
        path = tmp_path / "timeseries.csv"
        write_timeseries(traj, str(path))
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["step", "t", "energy", "near"]
        assert len(frame) == len(traj.times)
