import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from capflow.grid import (
    GridSpec, ddx, ddy, fd_weights, integrate, lp_norm, one_sided_traces, pressure_nodes, side_values, trace_jump,
)


def test_fd_weights_centered_second_derivative():
    w = fd_weights(0.0, [-1.0, 0.0, 1.0], 2)
    np.testing.assert_allclose(w[1], [-0.5, 0.0, 0.5], atol=1e-15)
    np.testing.assert_allclose(w[2], [1.0, -2.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("bad", [dict(Nx=12), dict(Nx=4), dict(Ny=4), dict(dt=0.0), dict(dt=0.03, t0=0.5),
                                 dict(p_diag=3.0), dict(stretch=-1.0)])
def test_gridspec_rejects_bad_values(bad):
    with pytest.raises(ValueError):
        GridSpec(**bad)


def test_ddx_analytic_modes(grid):
    X = np.broadcast_to(grid.x[:, None], grid.shape)
    np.testing.assert_allclose(ddx(np.sin(3 * X), grid, 1, axis=-2), 3 * np.cos(3 * X), atol=1e-10)
    np.testing.assert_allclose(ddx(np.cos(3 * grid.x), grid, 2), -9 * np.cos(3 * grid.x), atol=1e-10)
    assert np.all(ddx(np.full(grid.Nx, 2.5), grid, 1) == 0.0)


@given(k=st.integers(1, 7), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_ddx_exact_on_resolved_modes(k, a, b):
    g = GridSpec(Nx=32)
    f = a * np.sin(k * g.x) + b * np.cos(k * g.x)
    df = k * (a * np.cos(k * g.x) - b * np.sin(k * g.x))
    np.testing.assert_allclose(ddx(f, g, 1), df, atol=1e-10 * (1 + abs(a) + abs(b)) * k)


@given(seed=st.integers(0, 10_000))
def test_integral_of_x_derivative_vanishes(seed):
    g = GridSpec(Nx=16, Ny=8)
    f = np.random.default_rng(seed).normal(size=g.shape)
    assert abs(integrate(ddx(f, g, 1, axis=-2), g)) < 1e-12


def test_ddy_linear_and_kink(grid):
    y = np.broadcast_to(grid.y, grid.shape)
    np.testing.assert_allclose(ddy(y, grid), 1.0, atol=1e-12)
    d = ddy(np.abs(y), grid)
    np.testing.assert_allclose(d, np.broadcast_to(grid.sign_y, grid.shape), atol=1e-12)
    lo, up = one_sided_traces(d, grid)
    assert np.all(lo == -1.0) or np.allclose(lo, -1.0, atol=1e-12)
    np.testing.assert_allclose(up, 1.0, atol=1e-12)


def test_ddy_never_mixes_sides(grid):
    sgn = np.broadcast_to(grid.sign_y, grid.shape)
    assert np.max(np.abs(ddy(sgn, grid))) < 1e-12
    assert np.max(np.abs(ddy(sgn, grid, 2))) < 1e-12


def test_ddy_second_order_convergence():
    errs, hs = [], []
    for ny in (9, 17, 33, 65):
        g = GridSpec(Nx=8, Ny=ny)
        y = np.broadcast_to(g.y, g.shape)
        errs.append(np.max(np.abs(ddy(np.cos(y) * y ** 2, g) - (2 * y * np.cos(y) - y ** 2 * np.sin(y)))))
        hs.append(g.hmin)
    rate = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert rate >= 1.9
    g = GridSpec(Nx=8, Ny=9)
    y = np.broadcast_to(g.y, g.shape)
    np.testing.assert_allclose(ddy(y ** 2, g), 2 * y, atol=1e-12)


def test_trace_jump(grid, params):
    y = np.broadcast_to(grid.y, grid.shape)
    assert np.all(trace_jump(np.cos(y), grid)[1] == 0.0)
    np.testing.assert_array_equal(trace_jump(np.broadcast_to(grid.sign_y, grid.shape), grid)[1], 2.0)
    mu = np.broadcast_to(params.mu_nodes(grid), grid.shape)
    np.testing.assert_allclose(trace_jump(mu, grid)[1], params.mu2 - params.mu1)
    np.testing.assert_array_equal(side_values(grid, 1.0, 3.0), params.mu_nodes(grid))


def test_integrate_oracles(grid):
    assert abs(integrate(np.ones(grid.shape), grid) - 2 * grid.Lx * grid.Ly) < 1e-12
    X = np.broadcast_to(grid.x[:, None], grid.shape)
    assert abs(integrate(np.sin(X), grid)) < 1e-12
    assert abs(integrate(np.ones(grid.shape), grid, "lower") - grid.Lx * grid.Ly) < 1e-12
    assert abs(integrate(np.ones(grid.pshape), grid) - 2 * grid.Lx * grid.Ly) < 1e-12


def test_interface_arclength_against_adaptive_quadrature():
    g = GridSpec(Nx=64)
    h = 0.3 * np.cos(g.x)
    exact = quad(lambda x: np.sqrt(1 + 0.09 * np.sin(x) ** 2), 0, 2 * np.pi, epsabs=1e-13, epsrel=1e-13)[0]
    assert abs(integrate(np.ones(g.Nx), g, "interface", h=h) - exact) < 1e-8


def test_lp_norm_constant(grid):
    val = lp_norm(np.full(grid.shape, 2.0), grid, 6.0)
    assert abs(val - 2.0 * (2 * grid.Lx * grid.Ly) ** (1 / 6)) < 1e-12


def test_pressure_nodes_reproduce_linear_fields(grid):
    p = np.broadcast_to(1.0 + 0.5 * grid.ym, grid.pshape)
    pn = pressure_nodes(p, grid)
    np.testing.assert_allclose(pn, np.broadcast_to(1.0 + 0.5 * grid.y, grid.shape), atol=1e-12)


def test_ddx_rejects_nonfinite(grid):
    f = np.zeros(grid.Nx)
    f[3] = np.nan
    with pytest.raises(Exception):
        ddx(f, grid)
