import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from capflow.geometry import FourierInterpolant
from capflow.grid import GridSpec
from capflow.state import FlatState
from capflow.vof import (
    Bump, ConstantField, MollifierSpec, PhaseField, delta_mollified_normal, interface_normals_fft,
    mollified_normal, mollified_surface_term, mollified_surface_variation, normal_identity, pair_measure,
    random_bumps, sharp_surface_variation, surface_tension_linearized, surface_tension_term,
    vof_forward_residual, vof_sensitivity_residual,
)

G = GridSpec(Nx=64)


def interp(f):
    return FourierInterpolant(f(G.x), G.Lx)


H = interp(lambda x: 0.1 * np.cos(x))
DH = interp(lambda x: 0.05 * np.sin(2 * x) + 0.02)


def test_kernel_profiles():
    spec = MollifierSpec(delta=0.25, eps=0.1)
    assert abs(quad(spec.psi_mass, -1, 1)[0] - 1.0) < 1e-13
    s = np.linspace(-0.75, 0.75, 31)
    assert np.all(spec.psi_plat(s) == 1.0)
    assert np.all(spec.psi_plat(np.array([-1.0, 1.0, 1.3])) == 0.0)
    for f, df in ((spec.psi_plat, spec.dpsi_plat), (spec.psi_mass, spec.dpsi_mass)):
        x = np.linspace(-1.2, 1.2, 97) + 1e-3  # off the C^1 break points
        e = 1e-6
        np.testing.assert_allclose((f(x + e) - f(x - e)) / (2 * e), df(x), atol=1e-6)


def test_mass_hat_against_quadrature():
    spec = MollifierSpec(eps=0.3)
    for k in (0.0, 1.0, 5.0):
        ref = quad(lambda x: spec.psi_mass(x / spec.eps) / spec.eps * np.cos(k * x), -spec.eps, spec.eps)[0]
        assert abs(spec.mass_hat(np.array([k]))[0] - ref) < 1e-12


def test_flat_interface_normal_is_exact():
    flat = interp(lambda x: 0 * x)
    spec = MollifierSpec(eps=0.2)
    xs = np.linspace(0, 6, 7)
    for route in ("graph", "volume", "reduced"):
        np.testing.assert_allclose(mollified_normal(flat, spec, xs, 0.0, route), [[0.0] * 7, [1.0] * 7], atol=1e-14)


def test_volume_and_graph_routes_agree():
    spec = MollifierSpec(eps=0.1)
    xs = np.linspace(0, 6, 9)
    for off in (0.0, 0.03, -0.05):
        a = mollified_normal(H, spec, xs, H(xs) + off, "volume")
        b = mollified_normal(H, spec, xs, H(xs) + off, "graph")
        assert np.max(np.abs(a - b)) <= 1e-6
    np.testing.assert_allclose(mollified_normal(H, spec, xs, H(xs), "reduced"),
                               mollified_normal(H, spec, xs, H(xs), "graph"), atol=1e-12)


def _rate(eps, errs):
    return np.polyfit(np.log(eps), np.log(errs), 1)[0]


def test_mollified_normal_rates():
    xs = np.linspace(0, G.Lx, 24, endpoint=False)
    eps = [0.2, 0.1, 0.05, 0.025]
    e1, e2 = [], []
    for e in eps:
        spec = MollifierSpec(eps=e)
        e1.append(np.max(np.abs(mollified_normal(H, spec, xs, H(xs)) - np.stack([-H(xs, 1), 1 + 0 * xs]))))
        e2.append(np.max(np.abs(delta_mollified_normal(H, DH, spec, xs, H(xs)) - np.stack([-DH(xs, 1), 0 * xs]))))
    assert _rate(eps, e1) >= 1.9 and _rate(eps, e2) >= 1.9


def test_delta_normal_special_cases():
    spec = MollifierSpec(eps=0.1)
    xs = np.linspace(0, 6, 5)
    zero = interp(lambda x: 0 * x)
    assert np.all(delta_mollified_normal(H, zero, spec, xs, H(xs)) == 0.0)
    # difference quotient of the graph route at fixed query points
    ys = H(xs) + 0.01
    d = delta_mollified_normal(H, DH, spec, xs, ys)
    errs = []
    for s in (1e-3, 5e-4, 2.5e-4):
        hs = interp(lambda x: 0.1 * np.cos(x) + s * (0.05 * np.sin(2 * x) + 0.02))
        q = (mollified_normal(hs, spec, xs, ys) - mollified_normal(H, spec, xs, ys)) / s
        errs.append(np.max(np.abs(q - d)))
    assert max(errs) < 1e-6


def test_fft_normals_match_quadrature():
    g = GridSpec(Nx=64)
    h = 0.1 * np.cos(g.x)
    dh = 0.05 * np.sin(2 * g.x) + 0.02
    spec = MollifierSpec(eps=0.15)
    nu, dnu = interface_normals_fft(h, g, spec, dh)
    np.testing.assert_allclose(nu, mollified_normal(H, spec, g.x, h, "reduced"), atol=1e-12)
    np.testing.assert_allclose(dnu, delta_mollified_normal(H, DH, spec, g.x, h, "reduced"), atol=1e-12)


def test_slope_bound_enforced():
    steep = interp(lambda x: 0.9 * np.sin(x))
    with pytest.raises(ValueError, match="slope"):
        mollified_normal(steep, MollifierSpec(delta=0.25, eps=0.1), [0.0], [0.0])


@given(x0=st.floats(0, 6.2), y0=st.floats(-0.5, 0.5), rx=st.floats(0.5, 1.5), ry=st.floats(0.4, 1.0),
       a=st.floats(-2, 2), b=st.floats(-2, 2))
def test_weak_identities_on_bumps(x0, y0, rx, ry, a, b):
    h = interp(lambda x: 0.2 * np.cos(x) + 0.01 * np.sin(3 * x))
    bump = Bump(x0, y0, rx, ry, (a, b))
    vol, graph = normal_identity(h, bump)
    assert abs(vol - graph) <= 1e-8
    p, q = pair_measure(bump, h, DH, "gradient")
    assert abs(p - q) <= 1e-8
    c1 = surface_tension_term(h, bump, 1.3, "curvature")
    c2 = surface_tension_term(h, bump, 1.3, "byparts")
    assert abs(c1 - c2) <= 1e-8


@given(seed=st.integers(0, 10_000))
def test_bump_jet_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    b = random_bumps(rng, 1, space_time=True, t0=1.0)[0]
    x = b.x0 + 0.3 * b.rx * rng.uniform(-1, 1, 5)
    y = b.y0 + 0.3 * b.ry * rng.uniform(-1, 1, 5)
    t = b.tc + 0.3 * b.rt * rng.uniform(-1, 1)
    e = 1e-5
    j = b.jet(x, y, t)
    fd = lambda key, f: np.testing.assert_allclose(j[key], f, atol=1e-6 * (1 + np.max(np.abs(f))))
    fd("px", (b.jet(x + e, y, t)["phi"] - b.jet(x - e, y, t)["phi"]) / (2 * e))
    fd("py", (b.jet(x, y + e, t)["phi"] - b.jet(x, y - e, t)["phi"]) / (2 * e))
    fd("pt", (b.jet(x, y, t + e)["phi"] - b.jet(x, y, t - e)["phi"]) / (2 * e))
    fd("pxy", (b.jet(x, y + e, t)["px"] - b.jet(x, y - e, t)["px"]) / (2 * e))
    fd("pyy", (b.jet(x, y + e, t)["py"] - b.jet(x, y - e, t)["py"]) / (2 * e))
    fd("pxx", (b.jet(x + e, y, t)["px"] - b.jet(x - e, y, t)["px"]) / (2 * e))


def test_pairing_special_cases():
    zero = interp(lambda x: 0 * x)
    bump = Bump(1.0, 0.0, 1.0, 0.5)
    assert pair_measure(bump, H, zero) == 0.0
    exact = 0.02 * G.Lx
    assert abs(pair_measure(ConstantField(), H, DH) - exact) < 1e-12


def test_surface_term_special_cases():
    flat = interp(lambda x: 0 * x)
    bump = Bump(2.0, 0.1, 1.0, 0.6, (0.4, -1.1))
    assert surface_tension_term(flat, bump, 1.0, "curvature") == 0.0
    assert abs(surface_tension_term(flat, bump, 1.0, "byparts")) < 1e-15
    A = 1e-3
    small = interp(lambda x: A * np.cos(x))
    diff = abs(surface_tension_term(small, bump, 1.0) - surface_tension_linearized(small, bump, 1.0))
    assert diff <= 10 * A * A


def test_mollified_surface_terms_converge_in_eps():
    h = interp(lambda x: 0.2 * np.cos(x))
    bumps = random_bumps(np.random.default_rng(5), 3)
    eps = [0.2, 0.1, 0.05]
    e_force, e_var = [], []
    for e in eps:
        spec = MollifierSpec(eps=e)
        e_force.append(max(abs(mollified_surface_term(h, b, 1.0, spec) - surface_tension_term(h, b, 1.0, "byparts"))
                           for b in bumps))
        e_var.append(max(abs(mollified_surface_variation(h, DH, b, 1.0, spec) - sharp_surface_variation(h, DH, b, 1.0))
                         for b in bumps))
    assert _rate(eps, e_force) >= 1.0 and _rate(eps, e_var) >= 1.0


def test_sharp_surface_variation_difference_quotient():
    h = interp(lambda x: 0.2 * np.cos(x))
    b = Bump(1.5, 0.1, 1.2, 0.7, (0.3, 1.0))
    d = sharp_surface_variation(h, DH, b, 1.0)
    s = 1e-6
    hs = interp(lambda x: 0.2 * np.cos(x) + s * (0.05 * np.sin(2 * x) + 0.02))
    q = (surface_tension_term(hs, b, 1.0, "byparts") - surface_tension_term(h, b, 1.0, "byparts")) / s
    assert abs(q - d) < 1e-5


# transport --------------------------------------------------------------

def _h0():
    return interp(lambda x: 0.1 * np.cos(x))


def test_indicator_is_binary_and_static_for_zero_velocity():
    pf = PhaseField(lambda t, x, y: (0 * x, 0 * y), _h0(), 0.01)
    x = np.linspace(0, 6, 40)
    y = np.linspace(-0.5, 0.5, 40)
    a = pf(0.3, x, y)
    assert set(np.unique(a)) <= {0.0, 1.0}
    np.testing.assert_array_equal(a, (y < _h0()(x)).astype(float))


def test_uniform_vertical_velocity_shifts_interface():
    c = 0.4
    pf = PhaseField(lambda t, x, y: (0 * x, c + 0 * y), _h0(), 0.01)
    x = np.linspace(0, 6, 17)
    ha = pf.interface_height(0.5, x, _h0()(x), width=0.5)
    np.testing.assert_allclose(ha, _h0()(x) + c * 0.5, atol=1e-10)


def test_area_conserved_by_divergence_free_flow():
    # cellular flow from the stream function A sin(x) sin(y)
    A = 0.3
    vel = lambda t, x, y: (A * np.sin(x) * np.cos(y), -A * np.cos(x) * np.sin(y))
    errs = []
    for n in (32, 64):
        pf = PhaseField(vel, _h0(), 0.5 / n)
        x = np.linspace(0, 2 * np.pi, n, endpoint=False)
        ha = pf.interface_height(0.5, x, _h0()(x), width=0.4)
        errs.append(abs(np.mean(ha) - np.mean(_h0()(x))))
    assert errs[-1] < 1e-8


# residuals ---------------------------------------------------------------

def test_static_flat_state_has_vanishing_residual(params):
    b = random_bumps(np.random.default_rng(0), 1, space_time=True, t0=0.5)[0]
    spec = MollifierSpec(eps=0.3)
    rhs = []
    for n in (16, 64, 256):
        g = GridSpec(Nx=n, Ny=12, dt=0.05, t0=0.5)
        z = FlatState.zeros(g, g.M + 1)
        out = vof_forward_residual(z, g, params, b, spec)
        assert all(v == 0.0 for v in out["terms"].values()) and out["divergence"] == 0.0
        # the surface term of a flat interface is a pure x-derivative
        rhs.append(abs(out["rhs"]))
    assert rhs[0] > rhs[1] > rhs[2] and rhs[2] < 1e-5
    sens = vof_sensitivity_residual(z, z, g, params, b, spec)
    assert sens["momentum"] == 0.0 and sens["divergence"] == 0.0
