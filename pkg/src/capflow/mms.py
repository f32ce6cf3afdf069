"""Manufactured solutions for the linear Stokes free-boundary solver.

Fields are sums of separable terms X(x) T(t) Y_side(y) with hand-coded
derivatives, so the data (f, f_d, g_v, g_w, g_h) are exact.

``spatial`` is linear in t with a time-independent interface trace of w, so
implicit Euler (and the explicit g_h lag) is exact in time and only the
y-discretization error remains.  ``temporal`` is piecewise linear/quadratic
in y, which the discretization reproduces exactly, and nonlinear in t.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import FlatState, RhsTuple


def _xfun(kind, k):
    if kind == "cos":
        return (lambda x: np.cos(k * x), lambda x: -k * np.sin(k * x), lambda x: -k * k * np.cos(k * x))
    return (lambda x: np.sin(k * x), lambda x: k * np.cos(k * x), lambda x: -k * k * np.sin(k * x))


def _prod(a, b):
    """(f, f', f'') of a product of two (f, f', f'') triples."""
    return (
        lambda y: a[0](y) * b[0](y),
        lambda y: a[1](y) * b[0](y) + a[0](y) * b[1](y),
        lambda y: a[2](y) * b[0](y) + 2 * a[1](y) * b[1](y) + a[0](y) * b[2](y),
    )


def _poly(c0, c1=0.0, c2=0.0):
    return (lambda y: c0 + c1 * y + c2 * y * y, lambda y: c1 + 2 * c2 * y, lambda y: 2 * c2 + 0 * y)


def _sine_wall(Ly):
    a = np.pi / (2 * Ly)
    return (lambda y: np.sin(a * (y + Ly)), lambda y: a * np.cos(a * (y + Ly)), lambda y: -a * a * np.sin(a * (y + Ly)))


@dataclass
class Term:
    X: tuple
    T: tuple
    Ylo: tuple
    Yup: tuple


class Field:
    def __init__(self, terms):
        self.terms = terms

    def _eval(self, x, ylo, yup, t, dx=0, dy=0, dt=0):
        out = 0.0
        for tm in self.terms:
            xv = tm.X[dx](x)[:, None]
            tv = tm.T[dt](t)
            lo = tm.Ylo[dy](ylo)[None, :]
            up = tm.Yup[dy](yup)[None, :]
            out = out + tv * xv * np.concatenate([lo * np.ones_like(xv), up * np.ones_like(xv)], axis=1)
        return out

    def nodes(self, grid, t, **d):
        return self._eval(grid.x, grid.y_lower, grid.y_upper, t, **d)

    def mids(self, grid, t, **d):
        return self._eval(grid.x, grid.ym_lower, grid.ym_upper, t, **d)

    def traces(self, grid, t, **d):
        """(lower, upper) values at y=0."""
        a = self._eval(grid.x, np.zeros(1), np.zeros(1), t, **d)
        return a[:, 0], a[:, 1]


class Interface:
    def __init__(self, X, T):
        self.X, self.T = X, T

    def __call__(self, grid, t, dx=0, dt=0):
        return self.T[dt](t) * self.X[dx](grid.x)


class Manufactured:
    """Exact (v, w, pi, h) with the matching linear Stokes data."""

    def __init__(self, v, w, p, h):
        self.v, self.w, self.p, self.h = v, w, p, h

    def state(self, grid):
        M = grid.M
        z = FlatState.zeros(grid, M + 1)
        for m, t in enumerate(grid.times):
            z.v[m] = self.v.nodes(grid, t)
            z.w[m] = self.w.nodes(grid, t)
            z.p[m] = self.p.mids(grid, t)
            z.h[m] = self.h(grid, t)
            lo, up = self.p.traces(grid, t)
            z.r[m] = up - lo
        return z

    def data(self, grid, params):
        rho = params.rho_nodes(grid)
        mu = params.mu_nodes(grid)
        R = RhsTuple.zeros(grid, grid.M + 1)
        for m, t in enumerate(grid.times):
            v, w, p = self.v, self.w, self.p
            R.fv[m] = (rho * v.nodes(grid, t, dt=1) - mu * (v.nodes(grid, t, dx=2) + v.nodes(grid, t, dy=2))
                       + p.nodes(grid, t, dx=1))
            R.fw[m] = (rho * w.nodes(grid, t, dt=1) - mu * (w.nodes(grid, t, dx=2) + w.nodes(grid, t, dy=2))
                       + p.nodes(grid, t, dy=1))
            R.fd[m] = v.mids(grid, t, dx=1) + w.mids(grid, t, dy=1)

            def jump(f, **d):
                lo, up = f.traces(grid, t, **d)
                return params.mu2 * up - params.mu1 * lo

            R.gv[m] = -jump(v, dy=1) - jump(w, dx=1)
            plo, pup = p.traces(grid, t)
            R.gw[m] = -2 * jump(w, dy=1) + (pup - plo) - params.sigma * self.h(grid, t, dx=2)
            R.gh[m] = self.h(grid, t, dt=1) - w.traces(grid, t)[1]
        return R

    def initial(self, grid):
        return self.v.nodes(grid, 0.0), self.w.nodes(grid, 0.0), self.h(grid, 0.0)


def spatial(Ly):
    """Smooth per side, kinks at y=0, linear in t, w(x,0,t) fixed in time."""
    S = _sine_wall(Ly)
    lin = (lambda t: 1 + t, lambda t: 1.0 + 0 * t)
    one = (lambda t: 1.0 + 0 * t, lambda t: 0.0 * t)
    tt = (lambda t: t, lambda t: 1.0 + 0 * t)
    v = Field([Term(_xfun("cos", 1), lin, _prod(S, _poly(1, 0.5)), _prod(S, _poly(1, -0.3)))])
    w = Field([
        Term(_xfun("sin", 1), one, _prod(S, _poly(1, -0.4)), _prod(S, _poly(1, 0.2))),
        Term(_xfun("sin", 1), tt, _prod(S, _poly(0, 1)), _prod(S, _poly(0, 0.5))),
    ])
    cy = (np.cos, lambda y: -np.sin(y), lambda y: -np.cos(y))
    p = Field([
        Term(_xfun("cos", 1), lin, _poly(0.7, 0, 0.7), _prod(cy, _poly(1))),
        Term(_xfun("cos", 1), lin, _poly(0), _poly(0, 0.4)),
    ])
    h = Interface(_xfun("cos", 1), (lambda t: 0.1 * (1 + 0.5 * t), lambda t: 0.05 + 0 * t))
    return Manufactured(v, w, p, h)


def temporal(Ly):
    """Exactly representable in y, nonlinear in t."""
    A = (lambda t: np.exp(-t), lambda t: -np.exp(-t))
    B = (lambda t: np.cos(2 * t), lambda t: -2 * np.sin(2 * t))
    C = (lambda t: 1 + t * t, lambda t: 2 * t)
    D = (lambda t: 0.1 * (1 + np.sin(3 * t)), lambda t: 0.3 * np.cos(3 * t))
    c = 0.5 * Ly
    v = Field([Term(_xfun("cos", 1), A, _poly(1, 1 / Ly), _poly(1, -1 / Ly))])
    # (Ly + y)(c - y) and (Ly - y)(c + y)
    w = Field([Term(_xfun("sin", 1), B, _poly(Ly * c, c - Ly, -1), _poly(Ly * c, Ly - c, -1))])
    p = Field([Term(_xfun("cos", 1), C, _poly(1, 0.3), _poly(0.5, -0.2))])
    h = Interface(_xfun("cos", 1), D)
    return Manufactured(v, w, p, h)


def solution_error(z, exact):
    """Max relative error over all levels in (v, w, h)."""
    num = max(np.max(np.abs(z.v - exact.v)), np.max(np.abs(z.w - exact.w)), np.max(np.abs(z.h - exact.h)))
    den = max(np.max(np.abs(exact.v)), np.max(np.abs(exact.w)), np.max(np.abs(exact.h)))
    return float(num / den)


def fitted_rate(hs, errs):
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
