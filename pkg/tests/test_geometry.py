import numpy as np
import pytest
from hypothesis import given, strategies as st

from capflow.geometry import (
    FourierInterpolant, check_slope_bound, curvature, curvature_divergence, dgamma_kappa, g_kappa, gamma_kappa,
    unit_normal,
)
from capflow.grid import GridSpec


def test_flat_interface():
    g = GridSpec(Nx=32)
    h = np.zeros(g.Nx)
    assert np.all(g_kappa(h, g) == 0.0)
    assert np.all(curvature(h, g) == 0.0)
    n = unit_normal(h, g)
    assert np.all(n[0] == 0.0) and np.all(n[1] == 1.0)


@pytest.mark.parametrize("amp,tol", [(0.2, 1e-8), (0.5, 1e-8)])
def test_curvature_matches_divergence_form(amp, tol):
    g = GridSpec(Nx=256)
    h = amp * np.cos(g.x)
    assert np.max(np.abs(curvature(h, g) - curvature_divergence(h, g))) <= tol


def test_curvature_closed_form():
    # h = a cos x: kappa = -a cos x / (1 + a^2 sin^2 x)^(3/2)
    g = GridSpec(Nx=64)
    a = 0.3
    exact = -a * np.cos(g.x) / (1 + a * a * np.sin(g.x) ** 2) ** 1.5
    np.testing.assert_allclose(curvature(a * np.cos(g.x), g), exact, atol=1e-12)


def test_small_amplitude_linearization():
    g = GridSpec(Nx=64)
    A = 1e-3
    kap = curvature(A * np.cos(g.x), g)
    assert np.max(np.abs(kap + A * np.cos(g.x))) <= 1e-4 * A


def test_vanishing_second_derivative_point():
    # h = a sin x has h'' = 0 at x = 0, where both G_kappa and kappa vanish
    g = GridSpec(Nx=64)
    a = 0.4
    h = a * np.sin(g.x)
    assert abs(g_kappa(h, g)[0]) < 1e-13 and abs(curvature(h, g)[0]) < 1e-13
    theta = np.arctan(a)
    np.testing.assert_allclose(unit_normal(h, g)[:, 0], [-np.sin(theta), np.cos(theta)], atol=1e-13)


@given(seed=st.integers(0, 10_000), c=st.floats(-2, 2))
def test_normal_and_curvature_invariants(seed, c):
    g = GridSpec(Nx=32)
    rng = np.random.default_rng(seed)
    h = sum(rng.normal() * 0.1 / k * np.cos(k * g.x + rng.uniform(0, 6)) for k in range(1, 5))
    n = unit_normal(h, g)
    np.testing.assert_allclose(np.sum(n * n, axis=0), 1.0, atol=1e-12)
    assert np.all(n[1] > 0)
    np.testing.assert_allclose(curvature(h + c, g), curvature(h, g), atol=1e-12)


@given(p=st.floats(-5, 5))
def test_gamma_derivative(p):
    e = 1e-6
    fd = (gamma_kappa(p + e) - gamma_kappa(p - e)) / (2 * e)
    assert abs(fd - dgamma_kappa(p)) < 1e-8
    assert 0.0 <= gamma_kappa(p) < 1.0


def test_slope_bound():
    assert check_slope_bound(np.array([0.1, -0.5]), 0.25) == 0.5
    with pytest.raises(ValueError, match="slope bound"):
        check_slope_bound(np.array([0.9]), 0.25)


def test_fourier_interpolant_exact():
    g = GridSpec(Nx=16)
    f = FourierInterpolant(np.sin(2 * g.x) + 0.5, g.Lx)
    x = np.linspace(-1, 7, 50)
    np.testing.assert_allclose(f(x), np.sin(2 * x) + 0.5, atol=1e-13)
    np.testing.assert_allclose(f(x, 1), 2 * np.cos(2 * x), atol=1e-12)
    np.testing.assert_allclose(f(x, 2), -4 * np.sin(2 * x), atol=1e-12)
