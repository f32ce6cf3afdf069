import numpy as np
import pytest

from capflow.grid import GridSpec
from capflow.scenario import base_control, control_direction
from capflow.solver import FixedPointError, solve_forward, solve_sensitivity
from capflow.state import ControlData, FlatState
from capflow.studies import fitted_slope


def test_zero_data_converges_immediately(small_grid, params):
    z, rep = solve_forward(ControlData.zeros(small_grid), small_grid, params)
    assert z.max_abs() == 0.0 and rep.iterations == 1 and rep.converged


def test_small_data_contraction(small_grid, params):
    g = small_grid
    ctrl = ControlData(np.zeros(g.shape), np.zeros(g.shape), 0.01 * np.cos(g.x))
    z, rep = solve_forward(ctrl, g, params)
    assert rep.converged
    assert all(r < 1 for r in rep.ratios)
    assert all(b < a for a, b in zip(rep.updates[:-1], rep.updates[1:]))


def test_fixed_point_residual(small_grid, params):
    z, rep = solve_forward(base_control(small_grid), small_grid, params, tol=1e-10)
    assert rep.final_residual <= 1e-10 * (1 + z.norm(small_grid))


def test_shift_equivariance(small_grid, params):
    g = small_grid
    ctrl = base_control(g, seed=3)
    z, _ = solve_forward(ctrl, g, params, tol=1e-12)
    sh = ControlData(np.roll(ctrl.v0, 2, 0), np.roll(ctrl.w0, 2, 0), np.roll(ctrl.h0, 2), np.roll(ctrl.c, 2, 2))
    zs, _ = solve_forward(sh, g, params, tol=1e-12)
    for name in ("v", "w", "h"):
        np.testing.assert_allclose(getattr(zs, name), np.roll(getattr(z, name), 2, -1 if name == "h" else -2),
                                   atol=1e-10)


def test_sensitivity_zero_direction(small_grid, params):
    g = small_grid
    ctrl = base_control(g)
    z, _ = solve_forward(ctrl, g, params)
    dz, _ = solve_sensitivity(z, ctrl, ControlData.zeros(g), g, params)
    assert dz.max_abs() == 0.0


def test_sensitivity_linearity_and_initial_guess(small_grid, params, rng):
    g = small_grid
    ctrl = base_control(g)
    z, _ = solve_forward(ctrl, g, params, tol=1e-12)
    d1, d2 = control_direction(g, rng), control_direction(g, rng)
    a, b = 0.7, -1.3
    dab = ControlData(d1.v0, d1.w0, d1.h0, a * d1.c + b * d2.c)
    s1, _ = solve_sensitivity(z, ctrl, d1, g, params, tol=1e-12)
    s2, _ = solve_sensitivity(z, ctrl, d2, g, params, tol=1e-12)
    sab, _ = solve_sensitivity(z, ctrl, dab, g, params, tol=1e-12)
    assert (sab - (s1 * a + s2 * b)).norm(g) <= 1e-9 * sab.norm(g)
    guess = FlatState.zeros(g, g.M + 1)
    guess.v[...] = 1.0
    s1b, _ = solve_sensitivity(z, ctrl, d1, g, params, tol=1e-12, dz_init=guess)
    assert (s1b - s1).norm(g) <= 1e-9 * s1.norm(g)


def test_taylor_remainder_slope(small_grid, params, rng):
    g = small_grid
    ctrl = base_control(g)
    z, _ = solve_forward(ctrl, g, params, tol=1e-12)
    d = control_direction(g, rng)
    dz, _ = solve_sensitivity(z, ctrl, d, g, params, tol=1e-12)
    ss = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
    rem = []
    for s in ss:
        zs, _ = solve_forward(ControlData(ctrl.v0, ctrl.w0, ctrl.h0, ctrl.c + s * d.c), g, params, tol=1e-12)
        rem.append((zs - z - dz * s).norm(g))
    assert abs(fitted_slope(ss, rem) - 2.0) <= 0.1


def test_flat_and_physical_controls_agree_for_y_independent_force(small_grid, params):
    g = small_grid
    c = np.zeros((2, g.M + 1) + g.shape)
    c[0] = 0.5 * np.cos(g.x)[:, None]
    c[1] = 0.3 * np.sin(2 * g.x)[:, None]
    h0 = 0.02 * np.cos(g.x)
    zf, _ = solve_forward(ControlData(np.zeros(g.shape), np.zeros(g.shape), h0, c, "flat"), g, params)
    zp, _ = solve_forward(ControlData(np.zeros(g.shape), np.zeros(g.shape), h0, c, "physical"), g, params)
    assert (zf - zp).norm(g) <= 1e-9 * zf.norm(g)


def test_sensitivity_rejects_bad_directions(small_grid, params):
    g = small_grid
    ctrl = base_control(g)
    z, _ = solve_forward(ctrl, g, params)
    bad = ControlData(np.zeros(g.shape), np.zeros(g.shape), np.cos(g.x))
    with pytest.raises(ValueError, match="dh0"):
        solve_sensitivity(z, ctrl, bad, g, params)
    with pytest.raises(ValueError, match="kinds"):
        solve_sensitivity(z, ctrl, ControlData.zeros(g, "physical"), g, params)


def test_nonconvergence_raises(small_grid, params):
    with pytest.raises(FixedPointError) as info:
        solve_forward(base_control(small_grid, amplitude=50.0), small_grid, params, kmax=3)
    assert info.value.report.iterations == 3


def test_nonfinite_control_rejected(small_grid, params):
    ctrl = base_control(small_grid)
    c = ctrl.c.copy()
    c[0, 1, 2, 3] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        solve_forward(ControlData(ctrl.v0, ctrl.w0, ctrl.h0, c), small_grid, params)
