import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embedcal.models import thermal as th
from embedcal.models.linear import LinearModel
from oracles import heat_1d

CLEAN = th.ramp_boundary


@pytest.fixture(scope="module")
def concrete_run():
    model = th.ThermalModel.isotropic(th.CONCRETE, 20)
    return th.solve_transient(model, CLEAN, 6000.0)


def test_linear_model_batch_matches_call():
    x = np.linspace(0.4, 1.0, 7)
    m = LinearModel(x)
    thetas = np.array([[1.0], [2.5], [-3.0]])
    np.testing.assert_array_equal(m.evaluate_batch(thetas), np.vstack([m(t) for t in thetas]))


def test_mesh_numbering():
    mesh = th.Mesh(2, 1.0)
    assert mesh.n_nodes == 9 and mesh.n_elements == 4
    np.testing.assert_array_equal(mesh.connectivity()[0], [0, 1, 4, 3])
    np.testing.assert_array_equal(mesh.right_nodes(), [2, 5, 8])
    np.testing.assert_allclose(mesh.node_coords()[5], [1.0, 0.5])
    assert mesh.locate(0.75, 0.25)[0] == 1


def test_reference_matrices():
    m, k = th._reference_matrices(0.5)
    assert m.sum() == pytest.approx(0.25)
    np.testing.assert_allclose(k @ np.ones(4), 0.0, atol=1e-14)
    # consistent bilinear mass matrix h^2/36 [4 2 1 2; ...]
    np.testing.assert_allclose(m[0], 0.25 / 36 * np.array([4, 2, 1, 2]))


def test_assembly_integrates_linear_field():
    mesh = th.Mesh(4, 0.4)
    mass, stiff = th.assemble(mesh, np.full(16, 2.0), np.full(16, 3.0))
    assert mass.sum() == pytest.approx(2.0 * 0.16)
    x = mesh.node_coords()[:, 0]
    # energy of T = x is k * area * |grad T|^2
    assert x @ (stiff @ x) == pytest.approx(3.0 * 0.16)


def test_equilibrium_stays_at_reference():
    model = th.ThermalModel.isotropic(th.CONCRETE, 20)
    hist = th.solve_transient(model, 273.0, 3000.0)
    assert np.max(np.abs(hist.values - 273.0)) < 1e-9


def test_steady_state_reaches_plateau():
    model = th.ThermalModel.isotropic(th.STEEL, 10)
    hist = th.solve_transient(model, CLEAN, 1700 * 300.0)
    assert np.max(np.abs(hist.values[-1] - 303.0)) < 0.01


def test_against_1d_oracle(concrete_run):
    x, u = heat_1d(th.CONCRETE.alpha, 0.4, CLEAN, 6000.0)
    fe = th.sensor_temperatures(concrete_run, sample_times=[6000.0])[0]
    ref = np.interp([0.15, 0.30, 0.15, 0.30], x, u)
    np.testing.assert_allclose(fe, ref, atol=0.1)


def test_against_1d_oracle_small_step():
    model = th.ThermalModel.isotropic(th.CONCRETE, 20, dt=10.0)
    hist = th.solve_transient(model, CLEAN, 6000.0)
    x, u = heat_1d(th.CONCRETE.alpha, 0.4, CLEAN, 6000.0)
    fe = th.sensor_temperatures(hist, sample_times=[6000.0])[0]
    np.testing.assert_allclose(fe, np.interp([0.15, 0.30, 0.15, 0.30], x, u), atol=0.02)


def test_energy_balance(concrete_run):
    inflow = th.boundary_heat_rate(concrete_run)
    absorbed = np.cumsum(inflow) * concrete_run.model.dt
    stored = th.stored_energy(concrete_run)[1:]
    assert stored[-1] > 0
    np.testing.assert_allclose(absorbed, stored, rtol=1e-8)


def test_energy_balance_biphasic():
    model = th.ThermalModel.biphasic(th.CONCRETE, th.STEEL, n=20)
    hist = th.solve_transient(model, CLEAN, 6000.0)
    absorbed = np.sum(th.boundary_heat_rate(hist)) * model.dt
    assert absorbed == pytest.approx(th.stored_energy(hist)[-1], rel=1e-8)


def test_modal_matches_sparse():
    model = th.ThermalModel.isotropic(th.CONCRETE, 10)
    hist = th.solve_transient(model, CLEAN, 12000.0)
    solver = th.ModalSolver.for_model(model)
    steps = np.arange(0, 41, 4)
    sens, rates = solver.run([th.CONCRETE.alpha], CLEAN, 40, steps, heat=True)
    np.testing.assert_allclose(sens[0], th.sensor_temperatures(hist, sample_times=steps * 300.0), atol=1e-9)
    np.testing.assert_allclose(rates[0], th.midline_heat_rate(hist), rtol=1e-8, atol=1e-6)


def test_modal_rejects_bad_inputs():
    with pytest.raises(ValueError):
        th.ModalSolver.for_model(th.ThermalModel.biphasic(th.CONCRETE, th.STEEL, n=10))
    solver = th.ModalSolver(th.Mesh(10))
    for bad in ([0.0], [-1e-6], [np.nan]):
        with pytest.raises(ValueError):
            solver.run(bad, CLEAN, 5)


def test_sensor_interpolation_exact_for_linear_field():
    model = th.ThermalModel.isotropic(th.CONCRETE, 7)  # sensors fall inside elements
    coords = model.mesh.node_coords()
    field = 273 + 10 * coords[:, 0] - 4 * coords[:, 1]
    hist = th.TemperatureHistory(model, np.array([0.0]), field[None, :], np.array([273.0]))
    got = th.sensor_temperatures(hist)[0]
    want = [273 + 10 * x - 4 * y for x, y in model.layout.points]
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_midline_rate_of_linear_field():
    # T = 273 + 75 x with k = 2 gives q = -k dT/dx = -150 W/m^2 over a 0.4 m line
    mat = th.Material(1.0, 1.0, 2.0)
    for n in (10, 20, 7):
        model = th.ThermalModel.isotropic(mat, n)
        coords = model.mesh.node_coords()
        field = 273 + 75 * coords[:, 0]
        hist = th.TemperatureHistory(model, np.array([0.0]), field[None, :], np.array([303.0]))
        assert th.midline_heat_rate(hist)[0] == pytest.approx(-60.0, rel=1e-12)
    deep = th.ThermalModel.isotropic(mat, 10, depth=0.02)
    hist = th.TemperatureHistory(deep, np.array([0.0]), (273 + 75 * deep.mesh.node_coords()[:, 0])[None, :], np.array([303.0]))
    assert th.midline_heat_rate(hist)[0] == pytest.approx(-1.2, rel=1e-12)


def test_heat_flows_into_left_half(concrete_run):
    rates = th.midline_heat_rate(concrete_run)
    assert np.all(rates[1:] < 0)


def test_cumulative_heat_examples():
    np.testing.assert_allclose(th.cumulative_heat([1.0, 1.0, 1.0], [0.0, 1.0, 3.0]), [0.0, 1.0, 3.0])
    np.testing.assert_allclose(th.cumulative_heat([0.0, 2.0], [0.0, 2.0]), [0.0, 2.0])
    with pytest.raises(ValueError):
        th.cumulative_heat([1.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        th.cumulative_heat([1.0], [0.0, 1.0])


@settings(max_examples=25, deadline=None)
@given(st.floats(5e-7, 3e-6), st.floats(1.05, 2.0))
def test_faster_diffusion_heats_interior_sooner(alpha, ratio):
    # sensors at x = 0.30; far from the edge a consistent-mass backward Euler
    # solution undershoots by a few mK early on, so those are not monotone
    fwd = th.ThermalForward([60, 120], n=8)
    slow, fast = fwd.evaluate_batch(np.array([[alpha], [alpha * ratio]]))
    near = np.tile([False, True, False, True], 2)
    assert np.all(fast[near] > slow[near])
    heat = th.ThermalForward([600], n=8, output="heat")
    q_slow, q_fast = heat.evaluate_batch(np.array([[alpha], [alpha * ratio]]))[:, 0]
    assert q_fast > q_slow


def test_band_heats_faster():
    model = th.ThermalModel.biphasic(th.CONCRETE, th.STEEL, n=20)
    hist = th.solve_transient(model, CLEAN, 1200.0)
    layout = th.SensorLayout(points=((0.15, 0.17), (0.15, 0.30)), labels=("band", "plain"))
    band, plain = th.sensor_temperatures(hist, layout, [1200.0])[0]
    assert band > plain


def test_biphasic_band_cells():
    model = th.ThermalModel.biphasic(th.CONCRETE, th.STEEL, band=(0.16, 0.18), n=20)
    y0 = model.mesh.element_bounds()[:, 2]
    in_band = np.isclose(y0, 0.16)
    np.testing.assert_allclose(model.rho[in_band], th.STEEL.rho)
    np.testing.assert_allclose(model.rho[~in_band], th.CONCRETE.rho)
    half = th.ThermalModel.biphasic(th.CONCRETE, th.STEEL, band=(0.16, 0.17), n=20)
    assert half.rho[in_band][0] == pytest.approx(0.5 * (th.STEEL.rho + th.CONCRETE.rho))


def test_forward_output_layout():
    fwd = th.ThermalForward([20, 25], n=10)
    out = fwd([1e-6])
    assert out.shape == (8,) and fwd.n_outputs == 8
    sens, _ = fwd.solver.run([1e-6], fwd.boundary, fwd.n_steps, fwd.sample_steps)
    np.testing.assert_array_equal(out, sens[0].reshape(-1))
    heat = th.ThermalForward([100], n=10, output="heat")
    assert heat.n_outputs == 1 and heat([1e-6])[0] > 0
    with pytest.raises(ValueError):
        th.ThermalForward([7], n=10)
    with pytest.raises(ValueError):
        th.ThermalForward([20], output="flux")


def test_forward_heat_matches_sparse_path():
    model = th.ThermalModel.isotropic(th.Material(2300.0, 900.0, 1.2e-6), 10, depth=0.02)
    hist = th.solve_transient(model, CLEAN, 300 * 60.0)
    ref = th.cumulative_heat(-th.midline_heat_rate(hist), hist.times)[-1]
    fwd = th.ThermalForward([300], n=10, output="heat", depth=0.02)
    assert fwd([1.2e-6])[0] == pytest.approx(ref, rel=1e-8)


def test_model_validation():
    with pytest.raises(ValueError):
        th.Material(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        th.ThermalModel.isotropic(th.CONCRETE, 10, x_mid=0.5)
    with pytest.raises(ValueError):
        th.ThermalModel.isotropic(th.CONCRETE, 10, depth=0.0)
    with pytest.raises(ValueError):
        th.SensorLayout(points=((0.5, 0.5),)).check_inside(0.4)
    model = th.ThermalModel.isotropic(th.CONCRETE, 10)
    with pytest.raises(ValueError):
        th.solve_transient(model, CLEAN, 1000.0)
    with pytest.raises(ValueError):
        th.solve_transient(model, [273.0, 274.0], 900.0)


def test_history_field_and_csv(tmp_path, concrete_run):
    f = concrete_run.field(6000.0)
    assert f.shape == (21, 21)
    np.testing.assert_allclose(f[:, -1], 303.0)
    concrete_run.to_csv(tmp_path / "f.csv", 6000.0)
    data = np.loadtxt(tmp_path / "f.csv", delimiter=",", skiprows=1)
    assert data.shape == (441, 3)
    with pytest.raises(ValueError):
        concrete_run.field(100.0)
    th.write_series_csv(tmp_path / "s.csv", [0, 1], [2, 3], "heat_J")
    assert (tmp_path / "s.csv").read_text().startswith("time_s,heat_J")
