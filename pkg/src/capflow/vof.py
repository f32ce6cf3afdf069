"""Phase indicator, mollified normals and the VoF-type weak forms.

The indicator alpha of the lower phase is never stored on a grid.  It is
either represented by the interface graph (alpha = 1 below y = h(t,x)) or
queried pointwise by tracing characteristics back to t = 0.  The
sensitivity measure delta alpha is represented by its graph density dh.

Conventions: test fields phi are 2-vectors, (D phi)_ij = d_j phi_i, and
M = D phi - div(phi) I.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .geometry import FourierInterpolant, check_slope_bound
from .grid import ddx, ddy, integrate, one_sided_traces, pressure_dy, pressure_nodes

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# kernels

@dataclass(frozen=True)
class MollifierSpec:
    """Split mollifier: plateau profile in y, unit-mass profile in x."""

    delta: float = 0.25
    eps: float = 0.1

    def __post_init__(self):
        if not 0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    # plateau: 1 on |s| <= 1-delta, cos^2 ramp to 0 at |s| = 1
    def psi_plat(self, s):
        a = np.abs(np.asarray(s, dtype=float))
        d = self.delta
        ramp = np.cos(0.5 * np.pi * (a - (1 - d)) / d) ** 2
        return np.where(a <= 1 - d, 1.0, np.where(a < 1, ramp, 0.0))

    def dpsi_plat(self, s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        d = self.delta
        arg = 0.5 * np.pi * (a - (1 - d)) / d
        ramp = -np.sin(2 * arg) * 0.5 * np.pi / d
        return np.where((a > 1 - d) & (a < 1), np.sign(s) * ramp, 0.0)

    @staticmethod
    def psi_mass(s):
        s = np.asarray(s, dtype=float)
        return np.where(np.abs(s) < 1, 35.0 / 32.0 * (1 - s * s) ** 3, 0.0)

    @staticmethod
    def dpsi_mass(s):
        s = np.asarray(s, dtype=float)
        return np.where(np.abs(s) < 1, -35.0 * 6.0 / 32.0 * s * (1 - s * s) ** 2, 0.0)

    def kernel(self, x, y):
        e = self.eps
        return self.psi_plat(y / e) * self.psi_mass(x / e) / e

    def kernel_grad(self, x, y):
        e = self.eps
        gx = self.psi_plat(y / e) * self.dpsi_mass(x / e) / e ** 2
        gy = self.dpsi_plat(y / e) * self.psi_mass(x / e) / e ** 2
        return gx, gy

    def mass_hat(self, k):
        """Fourier transform of eps^-1 psi_mass(x/eps) at wavenumbers ``k``."""
        s, w = _leggauss(40)
        return np.cos(np.multiply.outer(np.asarray(k) * self.eps, s)) @ (w * self.psi_mass(s))


@lru_cache(maxsize=64)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def composite_gl(breaks, n=12, sub=1):
    """Nodes and weights of composite Gauss-Legendre on sorted breakpoints."""
    breaks = np.unique(np.asarray(breaks, dtype=float))
    s, w = _leggauss(n)
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        edges = np.linspace(a, b, sub + 1)
        for c, d in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (d - c) * s + 0.5 * (c + d))
            ws.append(0.5 * (d - c) * w)
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def level_crossings(f, a, b, levels, samples=256):
    """Roots in [a, b] of f(x) = L for each L in ``levels`` (brentq refined)."""
    xs = np.linspace(a, b, samples + 1)
    roots = []
    for L in levels:
        g = f(xs) - L
        for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
            roots.append(brentq(lambda t: f(t) - L, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15))
        roots.extend(xs[np.nonzero(g == 0)[0]].tolist())
    return roots


# ---------------------------------------------------------------------------
# test functions

def _b(r):
    return np.where(np.abs(r) < 1, (1 - r * r) ** 3, 0.0)


def _db(r):
    return np.where(np.abs(r) < 1, -6 * r * (1 - r * r) ** 2, 0.0)


def _ddb(r):
    return np.where(np.abs(r) < 1, -6 * (1 - r * r) ** 2 + 24 * r * r * (1 - r * r), 0.0)


@dataclass(frozen=True)
class Bump:
    """Tensor-product C^2 bump times a constant 2-vector.

    phi(t,x,y) = amp * b((x-x0)/rx) b((y-y0)/ry) [b((t-tc)/rt)] with
    b(r) = (1-r^2)^3 and x measured periodically with period ``Lx``.
    """

    x0: float
    y0: float
    rx: float
    ry: float
    amp: tuple = (1.0, 1.0)
    tc: float | None = None
    rt: float | None = None
    Lx: float = 2 * np.pi

    def _xr(self, x):
        d = np.asarray(x, dtype=float) - self.x0
        d = (d + 0.5 * self.Lx) % self.Lx - 0.5 * self.Lx
        return d / self.rx

    def jet(self, x, y, t=None):
        """Values and derivatives; each entry has shape ``(2,) + shape``."""
        rx, ry = self._xr(x), (np.asarray(y, dtype=float) - self.y0) / self.ry
        bx, dbx, ddbx = _b(rx), _db(rx) / self.rx, _ddb(rx) / self.rx ** 2
        by, dby, ddby = _b(ry), _db(ry) / self.ry, _ddb(ry) / self.ry ** 2
        if self.tc is None or t is None:
            bt, dbt = 1.0, 0.0
        else:
            rt = (t - self.tc) / self.rt
            bt, dbt = float(_b(rt)), float(_db(rt)) / self.rt
        a = np.asarray(self.amp, dtype=float).reshape((2,) + (1,) * np.ndim(bx * by))
        s = bx * by
        return {
            "phi": a * (bt * s),
            "px": a * (bt * dbx * by),
            "py": a * (bt * bx * dby),
            "pxx": a * (bt * ddbx * by),
            "pxy": a * (bt * dbx * dby),
            "pyy": a * (bt * bx * ddby),
            "pt": a * (dbt * s),
        }

    def x_breaks(self):
        return [self.x0 - self.rx, self.x0 + self.rx]

    def y_levels(self):
        return [self.y0 - self.ry, self.y0 + self.ry]


@dataclass(frozen=True)
class ConstantField:
    """Constant 2-vector test field on one x-period (for pairing checks)."""

    amp: tuple = (1.0, 1.0)
    Lx: float = 2 * np.pi

    def jet(self, x, y, t=None):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))
        a = np.asarray(self.amp, dtype=float).reshape((2,) + (1,) * len(shape))
        one = a * np.ones(shape)
        zero = np.zeros((2,) + shape)
        return {"phi": one, "px": zero, "py": zero, "pxx": zero, "pxy": zero, "pyy": zero, "pt": zero}

    def x_breaks(self):
        return [0.0, self.Lx]

    def y_levels(self):
        return []


def random_bumps(rng, n, Lx=2 * np.pi, y_range=(-0.4, 0.4), space_time=False, t0=None):
    """Seeded family of bumps placed so their support meets the interface."""
    out = []
    for _ in range(n):
        kw = dict(
            x0=float(rng.uniform(0, Lx)), y0=float(rng.uniform(*y_range)),
            rx=float(rng.uniform(0.6, 1.5)), ry=float(rng.uniform(0.5, 1.0)),
            amp=tuple(float(a) for a in rng.normal(size=2)), Lx=Lx,
        )
        if space_time:
            rt = float(rng.uniform(0.25, 0.45)) * t0
            kw.update(tc=float(rng.uniform(rt, t0 - rt)), rt=rt)
        out.append(Bump(**kw))
    return out


def stress_matrix(j):
    """M = D phi - div(phi) I from a jet: entries (m11, m12, m21, m22)."""
    return (-j["py"][1], j["py"][0], j["px"][1], -j["px"][0])


def stress_matrix_dy(j):
    return (-j["pyy"][1], j["pyy"][0], j["pxy"][1], -j["pxy"][0])


# ---------------------------------------------------------------------------
# graph quadrature

def _graph_nodes(hI, bump, extra_levels=(), n=12, sub=4):
    """Quadrature nodes over the x-support of ``bump`` along y = h(x)."""
    a, b = bump.x_breaks()
    levels = list(bump.y_levels()) + list(extra_levels)
    br = [a, b] + level_crossings(hI, a, b, levels)
    return composite_gl(br, n=n, sub=sub)


def normal_identity(hI, bump, n=12):
    """Both sides of  -int psi . grad(alpha) = int psi(x,h) . (-h', 1) dx.

    The volume side is int over {y < h} of div(psi), by 2D Gauss-Legendre
    over the exact subgraph.
    """
    x, w = _graph_nodes(hI, bump, n=n)
    h, hx = hI(x), hI(x, 1)
    j = bump.jet(x, h)
    graph = np.sum(w * (-hx * j["phi"][0] + j["phi"][1]))
    ylo, yhi = bump.y_levels()
    top = np.clip(h, ylo, yhi)
    s, ws = _leggauss(8)
    Y = 0.5 * (top - ylo)[:, None] * s[None, :] + 0.5 * (top + ylo)[:, None]
    W = 0.5 * (top - ylo)[:, None] * ws[None, :]
    jj = bump.jet(np.repeat(x[:, None], len(s), axis=1), Y)
    div = jj["px"][0] + jj["py"][1]
    volume = np.sum(w[:, None] * W * div)
    return volume, graph


def pair_measure(phi, hI, dhI, mode="value", n=12):
    """Pair the interface measure with density dh against a test function.

    ``value``: int phi(x,h) dh dx for a scalar function ``phi(x, y)`` given as
    a :class:`Bump` (first component used).  ``gradient``: the two expressions
    of  -int psi . grad d(delta alpha)  as a tuple (by-parts form, div form).
    """
    x, w = _graph_nodes(hI, phi, n=n)
    h, hx = hI(x), hI(x, 1)
    dh, dhx = dhI(x), dhI(x, 1)
    j = phi.jet(x, h)
    if mode == "value":
        return float(np.sum(w * j["phi"][0] * dh))
    if mode != "gradient":
        raise ValueError(f"unknown mode {mode!r}")
    parts = (-hx * j["py"][0] + j["py"][1]) * dh - j["phi"][0] * dhx
    div = (j["px"][0] + j["py"][1]) * dh
    return float(np.sum(w * parts)), float(np.sum(w * div))


def surface_tension_term(hI, phi, sigma, form="curvature", n=12):
    """Surface force tested against ``phi`` in curvature or by-parts form."""
    x, w = _graph_nodes(hI, phi, n=n)
    h, hx, hxx = hI(x), hI(x, 1), hI(x, 2)
    s = np.sqrt(1 + hx * hx)
    j = phi.jet(x, h)
    if form == "curvature":
        kap = hxx / s ** 3
        return float(np.sum(w * sigma * kap * (-hx * j["phi"][0] + j["phi"][1])))
    if form != "byparts":
        raise ValueError(f"unknown form {form!r}")
    m11, m12, m21, m22 = stress_matrix(j)
    # (h', -1) M (h', -1)^T / s
    q = hx * (m11 * hx - m12) - (m21 * hx - m22)
    return float(np.sum(w * sigma * q / s))


def surface_tension_linearized(hI, phi, sigma, n=12):
    """sigma int h'' phi_2(x, h) dx, the small-slope limit of the surface term."""
    x, w = _graph_nodes(hI, phi, n=n)
    j = phi.jet(x, hI(x))
    return float(np.sum(w * sigma * hI(x, 2) * j["phi"][1]))


# ---------------------------------------------------------------------------
# mollified normals

def _window_breaks(hI, spec, x, y):
    e, d = spec.eps, spec.delta
    levels = [y - e, y - (1 - d) * e, y + (1 - d) * e, y + e]
    return [x - e, x + e] + level_crossings(hI, x - e, x + e, levels, samples=64)


def _check_window(hI, spec, x):
    xs = np.linspace(x - spec.eps, x + spec.eps, 33)
    check_slope_bound(hI(xs, 1), spec.delta)


def mollified_normal(hI, spec, x, y, route="graph", n=12):
    """nu_eps at the points (x, y); ``route`` is graph, volume or reduced.

    ``reduced`` is the interface formula and ignores ``y``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.broadcast_to(np.asarray(y, dtype=float), x.shape)
    out = np.zeros((2,) + x.shape)
    e = spec.eps
    for i, (xi, yi) in enumerate(zip(x, y)):
        _check_window(hI, spec, xi)
        if route == "reduced":
            xs, ws = composite_gl([xi - e, xi + e], n=n, sub=4)
            k = spec.psi_mass((xs - xi) / e) / e
            out[:, i] = [np.sum(ws * k * -hI(xs, 1)), np.sum(ws * k)]
            continue
        xs, ws = composite_gl(_window_breaks(hI, spec, xi, yi), n=n, sub=2)
        hs = hI(xs)
        if route == "graph":
            k = spec.kernel(xs - xi, hs - yi)
            out[:, i] = [np.sum(ws * k * -hI(xs, 1)), np.sum(ws * k)]
        elif route == "volume":
            d = spec.delta
            s, wsy = _leggauss(n)
            acc = np.zeros(2)
            pieces = [(yi - e, yi - (1 - d) * e), (yi - (1 - d) * e, yi + (1 - d) * e), (yi + (1 - d) * e, yi + e)]
            for lo, hi in pieces:
                top = np.clip(hs, lo, hi)
                Y = 0.5 * (top - lo)[:, None] * s + 0.5 * (top + lo)[:, None]
                W = 0.5 * (top - lo)[:, None] * wsy
                gx, gy = spec.kernel_grad(xs[:, None] - xi, Y - yi)
                acc += [np.sum(ws[:, None] * W * gx), np.sum(ws[:, None] * W * gy)]
            out[:, i] = acc
        else:
            raise ValueError(f"unknown route {route!r}")
    return out


def delta_mollified_normal(hI, dhI, spec, x, y, route="graph", n=12):
    """Variation of nu_eps caused by the interface measure with density dh."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.broadcast_to(np.asarray(y, dtype=float), x.shape)
    out = np.zeros((2,) + x.shape)
    e = spec.eps
    for i, (xi, yi) in enumerate(zip(x, y)):
        _check_window(hI, spec, xi)
        if route == "reduced":
            xs, ws = composite_gl([xi - e, xi + e], n=n, sub=4)
            k = spec.psi_mass((xs - xi) / e) / e
            out[:, i] = [np.sum(ws * k * -dhI(xs, 1)), 0.0]
            continue
        if route != "graph":
            raise ValueError(f"unknown route {route!r}")
        xs, ws = composite_gl(_window_breaks(hI, spec, xi, yi), n=n, sub=2)
        gx, gy = spec.kernel_grad(xs - xi, hI(xs) - yi)
        dh = dhI(xs)
        out[:, i] = [np.sum(ws * gx * dh), np.sum(ws * gy * dh)]
    return out


def interface_normals_fft(h, grid, spec, dh=None):
    """nu_eps and delta nu_eps at (x_i, h(x_i)) for all grid columns.

    Uses the interface formula, which is exact under the slope bound, as a
    periodic convolution evaluated in Fourier space.
    """
    hx = ddx(h, grid, 1)
    check_slope_bound(hx, spec.delta)
    khat = spec.mass_hat(grid.k)
    conv = lambda f: np.fft.irfft(np.fft.rfft(f, axis=-1) * khat, n=grid.Nx, axis=-1)
    nu = np.stack([-conv(hx), np.ones_like(hx)])
    if dh is None:
        return nu
    dnu = np.stack([-conv(ddx(dh, grid, 1)), np.zeros_like(hx)])
    return nu, dnu


# ---------------------------------------------------------------------------
# transport

class FlatVelocity:
    """Physical velocity from a flat trajectory by space-time cubic interpolation.

    u(t,x,y) = u_hat(t, x, y - h(t,x)); Lagrange cubic in t and x (periodic)
    and one-sided cubic in the flat y coordinate.  Zero outside the strip.
    """

    def __init__(self, z, grid):
        self.grid = grid
        self.v, self.w, self.h = z.v, z.w, z.h

    def _t_stencil(self, t):
        g = self.grid
        M = g.M
        i = int(np.clip(np.floor(t / g.dt + 1e-12), 0, M))
        i0 = int(np.clip(i - 1, 0, max(M - 3, 0)))
        idx = np.arange(i0, min(i0 + 4, M + 1))
        return idx, _lagrange1d(g.times[idx], t)

    def _x_stencil(self, x):
        g = self.grid
        s = np.mod(x, g.Lx) / g.dx
        i = np.floor(s).astype(int)
        idx = (i[:, None] + np.arange(-1, 3)) % g.Nx
        r = s - i
        nodes = np.arange(-1, 3)[None, :].astype(float)
        return idx, _lagrange_weights_eq(nodes, r)

    def height(self, t, x):
        it, wt = self._t_stencil(t)
        ix, wx = self._x_stencil(x)
        hv = np.tensordot(wt, self.h[it], axes=(0, 0))
        return np.sum(hv[ix] * wx, axis=1)

    def __call__(self, t, x, y):
        g = self.grid
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        it, wt = self._t_stencil(t)
        ix, wx = self._x_stencil(x)
        hv = np.tensordot(wt, self.h[it], axes=(0, 0))
        eta = y - np.sum(hv[ix] * wx, axis=1)
        inside = np.abs(eta) <= g.Ly
        eta_c = np.clip(eta, -g.Ly, g.Ly)
        lower = eta_c < 0
        yl, yu = g.y_lower, g.y_upper
        Ny = g.Ny
        il = np.clip(np.searchsorted(yl, eta_c, side="right") - 2, 0, Ny - 4)
        iu = np.clip(np.searchsorted(yu, eta_c, side="right") - 2, 0, Ny - 4)
        iy = np.where(lower, il, Ny + iu)
        ynodes = np.where(lower[:, None], yl[il[:, None] + np.arange(4)], yu[iu[:, None] + np.arange(4)])
        wy = _lagrange_weights_eq(ynodes, eta_c)
        iy = iy[:, None] + np.arange(4)
        out = []
        for F in (self.v, self.w):
            Ft = np.tensordot(wt, F[it], axes=(0, 0))
            # gather (Q, 4x, 4y)
            vals = Ft[ix[:, :, None], iy[:, None, :]]
            out.append(np.einsum("qi,qj,qij->q", wx, wy, vals) * inside)
        return out[0], out[1]


def _lagrange1d(nodes, t):
    n = len(nodes)
    w = np.ones(n)
    for i in range(n):
        for j in range(n):
            if i != j:
                w[i] *= (t - nodes[j]) / (nodes[i] - nodes[j])
    return w


def _lagrange_weights_eq(nodes, r):
    """Row-wise cubic Lagrange weights; ``nodes`` (Q or 1, 4), ``r`` (Q,)."""
    nodes = np.broadcast_to(nodes, (len(r), 4))
    w = np.ones((len(r), 4))
    for i in range(4):
        for j in range(4):
            if i != j:
                w[:, i] *= (r - nodes[:, j]) / (nodes[:, i] - nodes[:, j])
    return w


class PhaseField:
    """Indicator of the lower phase by backward characteristics (RK4).

    ``velocity(t, x, y) -> (u1, u2)``; ``h0`` the initial interface as a
    callable.  The characteristic step is ``dt_char``.
    """

    def __init__(self, velocity, h0, dt_char):
        self.velocity = velocity
        self.h0 = h0
        self.dt_char = dt_char
        self.exits = 0

    def foot(self, t, x, y):
        """Backward characteristic foot X(0; t, x, y)."""
        x = np.array(x, dtype=float, copy=True)
        y = np.array(y, dtype=float, copy=True)
        n = max(1, int(np.ceil(t / self.dt_char - 1e-9)))
        k = t / n
        s = t
        u = self.velocity
        for _ in range(n):
            a1, b1 = u(s, x, y)
            a2, b2 = u(s - 0.5 * k, x - 0.5 * k * a1, y - 0.5 * k * b1)
            a3, b3 = u(s - 0.5 * k, x - 0.5 * k * a2, y - 0.5 * k * b2)
            a4, b4 = u(s - k, x - k * a3, y - k * b3)
            x -= k / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
            y -= k / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
            s -= k
        return x, y

    def level(self, t, x, y):
        """h0(x0) - y0 at the foot; alpha = 1 exactly where this is > 0."""
        x0, y0 = self.foot(t, x, y)
        return self.h0(x0) - y0

    def __call__(self, t, x, y):
        return (self.level(t, x, y) > 0).astype(float)

    def interface_height(self, t, x, guess, width=0.2, tol=1e-11, maxit=60):
        """Height of the alpha jump in each column x, by Illinois iteration."""
        a = np.asarray(guess, dtype=float) - width
        b = np.asarray(guess, dtype=float) + width
        fa, fb = self.level(t, x, a), self.level(t, x, b)
        if np.any(fa * fb > 0):
            raise RuntimeError("transition height not bracketed")
        side = np.zeros_like(a)
        c = b
        for _ in range(maxit):
            c = (a * fb - b * fa) / (fb - fa)
            fc = self.level(t, x, c)
            left = fc * fa > 0
            a = np.where(left, c, a)
            fa_new = np.where(left, fc, fa)
            b = np.where(left, b, c)
            fb_new = np.where(left, fb, fc)
            fb = np.where(left & (side == 1), 0.5 * fb_new, fb_new)
            fa = np.where(~left & (side == -1), 0.5 * fa_new, fa_new)
            side = np.where(left, 1, -1)
            if np.max(np.abs(b - a)) < tol or np.max(np.abs(fc)) < tol:
                break
        return c


def advect_indicator(z, grid, h0=None, substeps=4):
    """PhaseField transported by the physical velocity of a flat solution."""
    h0 = z.h[0] if h0 is None else h0
    return PhaseField(FlatVelocity(z, grid), FourierInterpolant(h0, grid.Lx), grid.dt / substeps)


def transport_area(z, grid, levels=None, substeps=4):
    """Symmetric-difference area between {alpha = 1} and {y < h} per level."""
    pf = advect_indicator(z, grid, substeps=substeps)
    levels = [grid.M] if levels is None else levels
    out = []
    for m in levels:
        t = grid.times[m]
        ha = pf.interface_height(t, grid.x, z.h[m])
        out.append(float(np.sum(np.abs(ha - z.h[m])) * grid.dx))
    return out


# ---------------------------------------------------------------------------
# weak-form residuals

def _trap_time(grid):
    w = np.full(grid.M + 1, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    return w


def _phys_grad(f, hx, grid):
    """Physical (d_x, d_y) of a flat nodal field, one-sided at y=0."""
    fy = ddy(f, grid, 1)
    return ddx(f, grid, 1, axis=-2) - hx[:, None] * fy, fy


def _contract_S(q, ux, uy, wx, wy, mu, j):
    """S(u,q;mu) : grad(phi) with S = -q I + mu (grad u + grad u^T)."""
    div_phi = j["px"][0] + j["py"][1]
    s11, s22 = 2 * mu * ux, 2 * mu * wy
    s12 = mu * (uy + wx)
    return -q * div_phi + s11 * j["px"][0] + s12 * (j["py"][0] + j["px"][1]) + s22 * j["py"][1]


def _level_fields(z, m, grid):
    v, w, h = z.v[m], z.w[m], z.h[m]
    hx = ddx(h, grid, 1)
    q = pressure_nodes(z.p[m], grid)
    return v, w, h, hx, q


def _relative(lhs_terms, rhs):
    total = sum(lhs_terms.values())
    scale = sum(abs(t) for t in lhs_terms.values()) + abs(rhs)
    return abs(total - rhs) / max(scale, 1e-300), total


def vof_forward_residual(z, grid, params, phi, spec, c=None):
    """Residual of the VoF momentum weak form tested with space-time ``phi``.

    ``z`` is a converged flat trajectory, ``c`` an optional flat control
    ``(c_v, c_w)`` trajectory.  Bulk integrals are evaluated in flat
    coordinates (unit Jacobian), the time derivative is moved onto ``phi``.
    Returns a dict with the relative momentum and divergence residuals.
    """
    rho = params.rho_nodes(grid)
    mu = params.mu_nodes(grid)
    wt = _trap_time(grid)
    terms = {"time": 0.0, "convection": 0.0, "stress": 0.0, "control": 0.0}
    rhs = 0.0
    div_res, div_scale = 0.0, 0.0
    for m in range(grid.M + 1):
        t = grid.times[m]
        v, w, h, hx, q = _level_fields(z, m, grid)
        Y = grid.y[None, :] + h[:, None]
        X = np.broadcast_to(grid.x[:, None], Y.shape)
        j = phi.jet(X, Y, t)
        if not np.any(j["phi"]) and not np.any(j["pt"]):
            continue
        ux, uy = _phys_grad(v, hx, grid)
        wx, wy = _phys_grad(w, hx, grid)
        tt = -rho * (v * j["pt"][0] + w * j["pt"][1])
        cv = -rho * (v * (j["px"][0] * v + j["py"][0] * w) + w * (j["px"][1] * v + j["py"][1] * w))
        st = _contract_S(q, ux, uy, wx, wy, mu, j)
        terms["time"] += wt[m] * integrate(tt, grid)
        terms["convection"] += wt[m] * integrate(cv, grid)
        terms["stress"] += wt[m] * integrate(st, grid)
        if c is not None:
            terms["control"] += wt[m] * integrate(-(c[0][m] * j["phi"][0] + c[1][m] * j["phi"][1]), grid)
        psi = j["phi"][0]
        div_res += wt[m] * integrate((ux + wy) * psi, grid)
        div_scale += wt[m] * integrate((np.abs(ux) + np.abs(wy)) * np.abs(psi), grid)
        # surface term along the graph
        nu = interface_normals_fft(h, grid, spec)
        nn = nu / np.sqrt(np.sum(nu * nu, axis=0))
        ji = phi.jet(grid.x, h, t)
        m11, m12, m21, m22 = stress_matrix(ji)
        Mn = (m11 * -hx + m12, m21 * -hx + m22)
        rhs += wt[m] * params.sigma * np.sum(nn[0] * Mn[0] + nn[1] * Mn[1]) * grid.dx
    rel, total = _relative(terms, rhs)
    return {
        "momentum": rel, "divergence": abs(div_res) / max(div_scale, 1e-300),
        "lhs": total, "rhs": rhs, "terms": terms,
    }


def vof_sensitivity_residual(z, dz, grid, params, phi, spec, c=None, dc=None):
    """Residual of the linearized VoF weak form tested with space-time ``phi``.

    ``dz`` is the flat sensitivity; physical sensitivities are formed per phase
    as d_u = du_hat - d_y u_hat * dh.  ``c``/``dc`` are the flat control and
    its variation.  Interface-measure terms are paired through the density dh.
    """
    rho = params.rho_nodes(grid)
    mu = params.mu_nodes(grid)
    wt = _trap_time(grid)
    Ny = grid.Ny
    sig = params.sigma
    terms = {k: 0.0 for k in ("time", "convection", "stress", "control", "density_jump", "stress_jump")}
    rhs = 0.0
    div_res, div_scale = 0.0, 0.0
    for m in range(grid.M + 1):
        t = grid.times[m]
        v, w, h, hx, q = _level_fields(z, m, grid)
        dv, dw, dh, dhx, dq = _level_fields(dz, m, grid)
        Y = grid.y[None, :] + h[:, None]
        X = np.broadcast_to(grid.x[:, None], Y.shape)
        j = phi.jet(X, Y, t)
        if not np.any(j["phi"]) and not np.any(j["pt"]):
            continue
        dhb, dhxb = dh[:, None], dhx[:, None]
        vy, wy_ = ddy(v, grid, 1), ddy(w, grid, 1)
        qy = pressure_dy(z.p[m], grid)
        # physical sensitivities of the per-phase extensions
        pv = dv - vy * dhb
        pw = dw - wy_ * dhb
        pq = dq - qy * dhb

        def dgrad(df, f, fy):
            fyy = ddy(f, grid, 2)
            fxy = ddx(fy, grid, 1, axis=-2)
            dfy = ddy(df, grid, 1) - fyy * dhb
            dfx_flat = ddx(df, grid, 1, axis=-2) - fxy * dhb - fy * dhxb
            return dfx_flat - hx[:, None] * dfy, dfy

        pux, puy = dgrad(dv, v, vy)
        pwx, pwy = dgrad(dw, w, wy_)
        ux, uy = _phys_grad(v, hx, grid)
        wx, wy = _phys_grad(w, hx, grid)
        tt = -rho * (pv * j["pt"][0] + pw * j["pt"][1])
        Dpu = (j["px"][0] * v + j["py"][0] * w, j["px"][1] * v + j["py"][1] * w)
        Dpdu = (j["px"][0] * pv + j["py"][0] * pw, j["px"][1] * pv + j["py"][1] * pw)
        cv = -rho * (pv * Dpu[0] + pw * Dpu[1] + v * Dpdu[0] + w * Dpdu[1])
        st = _contract_S(pq, pux, puy, pwx, pwy, mu, j)
        terms["time"] += wt[m] * integrate(tt, grid)
        terms["convection"] += wt[m] * integrate(cv, grid)
        terms["stress"] += wt[m] * integrate(st, grid)
        if dc is not None or c is not None:
            pc = [np.zeros(grid.shape), np.zeros(grid.shape)]
            for i in range(2):
                if dc is not None:
                    pc[i] = pc[i] + dc[i][m]
                if c is not None:
                    pc[i] = pc[i] - ddy(c[i][m], grid, 1) * dhb
            terms["control"] += wt[m] * integrate(-(pc[0] * j["phi"][0] + pc[1] * j["phi"][1]), grid)
        psi = j["phi"][0]
        div_res += wt[m] * integrate((pux + pwy) * psi, grid)
        div_scale += wt[m] * integrate((np.abs(pux) + np.abs(pwy)) * np.abs(psi), grid)
        # interface measure terms
        ji = phi.jet(grid.x, h, t)
        ut, wt_i = one_sided_traces(v, grid)[1], one_sided_traces(w, grid)[1]
        adv = (ji["pt"][0] + ji["px"][0] * ut + ji["py"][0] * wt_i,
               ji["pt"][1] + ji["px"][1] * ut + ji["py"][1] * wt_i)
        dens = (params.rho2 - params.rho1) * (ut * adv[0] + wt_i * adv[1]) * dh
        terms["density_jump"] += wt[m] * np.sum(dens) * grid.dx
        Sj = 0.0
        for side, sign, muv in ((0, -1.0, params.mu1), (1, 1.0, params.mu2)):
            idx = Ny - 1 if side == 0 else Ny
            Sj = Sj + sign * _contract_S(q[:, idx], ux[:, idx], uy[:, idx], wx[:, idx], wy[:, idx], muv,
                                         {k: a for k, a in ji.items()})
        terms["stress_jump"] += wt[m] * np.sum(-Sj * dh) * grid.dx
        # surface variation
        nu, dnu = interface_normals_fft(h, grid, spec, dh)
        nrm = np.sqrt(np.sum(nu * nu, axis=0))
        nn = nu / nrm
        m11, m12, m21, m22 = stress_matrix(ji)
        d11, d12, d21, d22 = stress_matrix_dy(ji)
        Mn = (m11 * -hx + m12, m21 * -hx + m22)
        dot = np.sum(dnu * nu, axis=0)
        a = (dnu[0] / nrm - dot * nu[0] / nrm ** 3, dnu[1] / nrm - dot * nu[1] / nrm ** 3)
        part1 = a[0] * Mn[0] + a[1] * Mn[1]
        dMn = ((d11 * -hx + d12) * dh + m11 * -dhx, (d21 * -hx + d22) * dh + m21 * -dhx)
        part2 = nn[0] * dMn[0] + nn[1] * dMn[1]
        rhs += wt[m] * sig * np.sum(part1 + part2) * grid.dx
    rel, total = _relative(terms, rhs)
    return {
        "momentum": rel, "divergence": abs(div_res) / max(div_scale, 1e-300),
        "lhs": total, "rhs": rhs, "terms": terms,
    }


def sharp_surface_variation(hI, dhI, phi, sigma, n=12):
    """Direct variation of the by-parts surface term in the direction dh.

    Differentiates sigma int (h',-1) M(x,h) (h',-1)^T / s dx with respect to h.
    """
    x, w = _graph_nodes(hI, phi, n=n)
    h, hx = hI(x), hI(x, 1)
    dh, dhx = dhI(x), dhI(x, 1)
    j = phi.jet(x, h)
    m11, m12, m21, m22 = stress_matrix(j)
    d11, d12, d21, d22 = stress_matrix_dy(j)
    s = np.sqrt(1 + hx * hx)
    q = hx * (m11 * hx - m12) - (m21 * hx - m22)
    dq_M = hx * (d11 * hx - d12) - (d21 * hx - d22)
    dq_h = 2 * m11 * hx - m12 - m21
    val = (dq_M * dh + dq_h * dhx) / s - q * hx * dhx / s ** 3
    return float(np.sum(w * sigma * val))


def mollified_surface_variation(hI, dhI, phi, sigma, spec, n=12):
    """The eps-dependent surface variation of the linearized weak form.

    Uses nu_eps and delta nu_eps at the interface points (interface formula).
    """
    x, w = _graph_nodes(hI, phi, n=n)
    h, hx = hI(x), hI(x, 1)
    dh, dhx = dhI(x), dhI(x, 1)
    nu = mollified_normal(hI, spec, x, h, route="reduced")
    dnu = delta_mollified_normal(hI, dhI, spec, x, h, route="reduced")
    j = phi.jet(x, h)
    m11, m12, m21, m22 = stress_matrix(j)
    d11, d12, d21, d22 = stress_matrix_dy(j)
    nrm = np.sqrt(np.sum(nu * nu, axis=0))
    Mn = (m11 * -hx + m12, m21 * -hx + m22)
    dot = np.sum(dnu * nu, axis=0)
    a = (dnu[0] / nrm - dot * nu[0] / nrm ** 3, dnu[1] / nrm - dot * nu[1] / nrm ** 3)
    dMn = ((d11 * -hx + d12) * dh + m11 * -dhx, (d21 * -hx + d22) * dh + m21 * -dhx)
    val = a[0] * Mn[0] + a[1] * Mn[1] + (nu[0] * dMn[0] + nu[1] * dMn[1]) / nrm
    return float(np.sum(w * sigma * val))


def mollified_surface_term(hI, phi, sigma, spec, n=12):
    """Surface term with nu_eps/|nu_eps| in place of the exact unit normal."""
    x, w = _graph_nodes(hI, phi, n=n)
    h, hx = hI(x), hI(x, 1)
    nu = mollified_normal(hI, spec, x, h, route="reduced")
    nn = nu / np.sqrt(np.sum(nu * nu, axis=0))
    j = phi.jet(x, h)
    m11, m12, m21, m22 = stress_matrix(j)
    Mn = (m11 * -hx + m12, m21 * -hx + m22)
    return float(np.sum(w * sigma * (nn[0] * Mn[0] + nn[1] * Mn[1])))
