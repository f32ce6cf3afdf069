"""Nonlinear right-hand sides of the transformed problem and their derivative.

Every component of N is a sum of product terms ``coef * f1 * f2 * ...`` of
named factors computed from the state (derivatives of v, w, h, traces and
jumps).  Keeping the terms tagged makes the directional derivative a plain
product rule and lets tests address individual terms.  All factors are
linear in the state except ``gk = gamma_kappa(h')``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import curvature, dgamma_kappa, gamma_kappa
from .grid import avg_midpoints, ddx, ddy, dy_midpoints, one_sided_traces, pressure_dy
from .state import FlatState, RhsTuple

# (name, coefficient key, factor names).  Coefficient keys: "mu", "rho",
# "one", "two", "mtwo", "mone", "sig", "msig".
F_TERMS = {
    "v": [
        ("visc_mixed", "mtwo_mu", ("hx", "dxyv")),
        ("visc_yy", "mu", ("hx", "hx", "dyyv")),
        ("visc_lap_h", "mmu", ("hxx", "dyv")),
        ("pressure", "one", ("dyp", "hx")),
        ("conv_x", "mrho", ("v", "dxv")),
        ("conv_hv", "rho", ("hx", "v", "dyv")),
        ("conv_w", "mrho", ("w", "dyv")),
        ("moving", "rho", ("dth", "dyv")),
    ],
    "w": [
        ("visc_mixed", "mtwo_mu", ("hx", "dxyw")),
        ("visc_yy", "mu", ("hx", "hx", "dyyw")),
        ("visc_lap_h", "mmu", ("hxx", "dyw")),
        ("conv_x", "mrho", ("v", "dxw")),
        ("conv_hv", "rho", ("hx", "v", "dyw")),
        ("conv_w", "mrho", ("w", "dyw")),
        ("moving", "rho", ("dth", "dyw")),
    ],
}
FD_TERMS = [("hx_dyv", "one", ("hxm", "dyvm"))]
GV_TERMS = [
    ("shear_x", "mtwo", ("jdxv", "hx")),
    ("shear_y", "two", ("hx", "hx", "jdyv")),
    ("normal_w", "mone", ("jdyw", "hx")),
    ("pressure", "one", ("r", "hx")),
    ("tension", "msig", ("hxx", "hx")),
    ("tension_gk", "sig", ("hxx", "gk", "hx")),
]
GW_TERMS = [
    ("shear_v", "mone", ("hx", "jdyv")),
    ("shear_w", "mone", ("hx", "jdxw")),
    ("normal_w", "one", ("hx", "hx", "jdyw")),
    ("tension_gk", "msig", ("hxx", "gk")),
]
H_TERMS = [("trace_v", "mone", ("tv", "hx"))]

SECOND_ORDER = ("dxyv", "dyyv", "dxyw", "dyyw", "hxx")


def _coefs(params, grid):
    mu = params.mu_nodes(grid)
    rho = params.rho_nodes(grid)
    s = params.sigma
    return {
        "one": 1.0, "mone": -1.0, "two": 2.0, "mtwo": -2.0,
        "mu": mu, "mmu": -mu, "mtwo_mu": -2.0 * mu,
        "rho": rho, "mrho": -rho,
        "sig": s, "msig": -s,
    }


def time_derivative_h(h, dt):
    """Backward difference in time; level 0 uses the forward difference."""
    h = np.asarray(h, dtype=float)
    if h.ndim == 1 or h.shape[0] < 2:
        return np.zeros_like(h)
    dth = np.empty_like(h)
    dth[1:] = (h[1:] - h[:-1]) / dt
    dth[0] = dth[1]
    return dth


def state_factors(z, params, grid, linear_only=False):
    """Named factors of the product terms, evaluated on a state trajectory.

    Interface factors carry a trailing singleton axis when they multiply bulk
    fields (``hx``, ``hxx``, ``dth``); the interface versions are ``hx_i`` etc.
    """
    v, w, h = z.v, z.w, z.h
    mu1, mu2 = params.mu1, params.mu2
    hx = ddx(h, grid, 1)
    hxx = ddx(h, grid, 2)
    dth = time_derivative_h(h, grid.dt)
    dxv, dxw = ddx(v, grid, 1, axis=-2), ddx(w, grid, 1, axis=-2)
    dyv, dyw = ddy(v, grid, 1), ddy(w, grid, 1)
    fac = {
        "v": v, "w": w, "dxv": dxv, "dxw": dxw, "dyv": dyv, "dyw": dyw,
        "dxyv": ddx(dyv, grid, 1, axis=-2), "dxyw": ddx(dyw, grid, 1, axis=-2),
        "dyyv": ddy(v, grid, 2), "dyyw": ddy(w, grid, 2),
        "dyp": pressure_dy(z.p, grid),
        "dyvm": dy_midpoints(v, grid), "hxm": hx[..., None],
        "r": z.r, "tv": one_sided_traces(v, grid)[1],
    }

    def jump(a, b_lo=mu1, b_up=mu2):
        lo, up = one_sided_traces(a, grid)
        return b_up * up - b_lo * lo

    fac["jdxv"] = jump(dxv)
    fac["jdxw"] = jump(dxw)
    fac["jdyv"] = jump(dyv)
    fac["jdyw"] = jump(dyw)
    fac["hx_b"], fac["hxx_b"], fac["dth_b"] = hx[..., None], hxx[..., None], dth[..., None]
    fac["hx_i"], fac["hxx_i"] = hx, hxx
    if not linear_only:
        fac["gk"] = gamma_kappa(hx)
    return fac


def _bulk_view(fac):
    out = dict(fac)
    out["hx"], out["hxx"], out["dth"] = fac["hx_b"], fac["hxx_b"], fac["dth_b"]
    return out


def _iface_view(fac):
    out = dict(fac)
    out["hx"], out["hxx"] = fac["hx_i"], fac["hxx_i"]
    return out


def _eval_term(coef, names, fac, dfac=None):
    """Product term, or its directional derivative when ``dfac`` is given."""
    if dfac is None:
        val = coef
        for n in names:
            val = val * fac[n]
        return val
    total = 0.0
    for i in range(len(names)):
        val = coef
        for j, n in enumerate(names):
            val = val * (dfac[n] if i == j else fac[n])
        total = total + val
    return total


def _term_groups():
    return [
        ("fv", F_TERMS["v"], _bulk_view),
        ("fw", F_TERMS["w"], _bulk_view),
        ("fd", FD_TERMS, _bulk_view),
        ("gv", GV_TERMS, _iface_view),
        ("gw", GW_TERMS, _iface_view),
        ("gh", H_TERMS, _iface_view),
    ]


def n_terms(z, params, grid, factors=None, dz=None):
    """Evaluate every tagged term; returns ``{(component, name): array}``.

    ``factors`` may override the factor dictionary (e.g. scaled second
    derivatives).  With ``dz`` the directional derivative of each term in
    direction ``dz`` is returned instead.
    """
    fac = state_factors(z, params, grid) if factors is None else factors
    dfac = None
    if dz is not None:
        dfac = state_factors(dz, params, grid, linear_only=True)
        dfac["gk"] = dgamma_kappa(fac["hx_i"]) * dfac["hx_i"]
    coefs = _coefs(params, grid)
    out = {}
    for comp, terms, view in _term_groups():
        f = view(fac)
        d = view(dfac) if dfac is not None else None
        for name, ck, names in terms:
            out[(comp, name)] = _eval_term(coefs[ck], names, f, d)
    return out


def _collect(terms, z, grid):
    lead = z.h.shape[:-1]
    zero = RhsTuple.zeros(grid, lead[0] if lead else None)
    acc = {k: np.array(getattr(zero, k)) for k in ("fv", "fw", "fd", "gv", "gw", "gh")}
    for (comp, _), val in terms.items():
        acc[comp] += val
    return RhsTuple(**acc)


def assemble_N(z, params, grid):
    """N(z) = (F_v, F_w, F_d, G_v, G_w, H) for a flat state trajectory."""
    return _collect(n_terms(z, params, grid), z, grid)


def assemble_N_along(z, dz, s_values, params, grid):
    """N(z + s dz) for each s, reusing the factors of z and dz.

    Every factor except gamma_kappa is linear in the state, so the
    derivatives are taken once and combined per s.
    """
    fac = state_factors(z, params, grid, linear_only=True)
    dfac = state_factors(dz, params, grid, linear_only=True)
    for s in s_values:
        f = {k: fac[k] + s * dfac[k] for k in fac}
        f["gk"] = gamma_kappa(f["hx_i"])
        yield _collect(n_terms(z, params, grid, factors=f), z, grid)


def linearize_N(z, dz, params, grid):
    """Directional derivative DN(z)[dz] by the product rule over all terms."""
    return _collect(n_terms(z, params, grid, dz=dz), z, grid)


def deformation_tensor(v, w, h, grid):
    """Components (xx, xy, yy) of the transformed deformation tensor."""
    hx = ddx(h, grid, 1)[..., None]
    dxv, dxw = ddx(v, grid, 1, axis=-2), ddx(w, grid, 1, axis=-2)
    dyv, dyw = ddy(v, grid, 1), ddy(w, grid, 1)
    dxx = 2 * dxv - 2 * hx * dyv
    dxy = dyv + dxw - hx * dyw
    dyy = 2 * dyw
    return dxx, dxy, dyy


def _normal_stress_traces(v0, w0, h0, params, grid):
    dxx, dxy, dyy = deformation_tensor(v0, w0, h0, grid)
    hx = ddx(h0, grid, 1)
    s = np.sqrt(1 + hx * hx)
    nx, ny = -hx / s, 1 / s
    out = {}
    for side, mu, idx in (("lo", params.mu1, grid.Ny - 1), ("up", params.mu2, grid.Ny)):
        a, b, c = dxx[..., idx], dxy[..., idx], dyy[..., idx]
        Dn = (a * nx + b * ny, b * nx + c * ny)
        nDn = nx * Dn[0] + ny * Dn[1]
        out[side] = (mu * Dn[0], mu * Dn[1], mu * nDn)
    return out, (nx, ny)


def jump_pressure_r0(v0, w0, h0, params, grid):
    """r0 = [mu nu^T D nu] + sigma * kappa_hat(h0)."""
    tr, _ = _normal_stress_traces(v0, w0, h0, params, grid)
    return tr["up"][2] - tr["lo"][2] + params.sigma * curvature(h0, grid)


@dataclass
class CompatibilityReport:
    tangential: tuple
    divergence: np.ndarray
    jump_v: np.ndarray
    jump_w: np.ndarray
    max_tangential: float
    max_divergence: float
    max_jump: float
    scale: float
    tol: float

    @property
    def relative(self):
        return max(self.max_tangential, self.max_divergence, self.max_jump) / self.scale

    @property
    def passed(self):
        return self.relative <= self.tol


def divergence_residual(v, w, h, grid):
    """div u_hat - F_d(u_hat, h) on the midpoint rows (the discrete form)."""
    hx = ddx(h, grid, 1)[..., None]
    return ddx(avg_midpoints(v, grid), grid, 1, axis=-2) + dy_midpoints(w, grid) - hx * dy_midpoints(v, grid)


def check_compatibility(v0, w0, h0, params, grid, tol=1e-6):
    """Residuals of the transformed compatibility conditions at t=0."""
    tr, (nx, ny) = _normal_stress_traces(v0, w0, h0, params, grid)
    tang = []
    for comp, n in ((0, nx), (1, ny)):
        lo = tr["lo"][comp] - tr["lo"][2] * n
        up = tr["up"][comp] - tr["up"][2] * n
        tang.append(up - lo)
    div = divergence_residual(v0, w0, h0, grid)
    lo_v, up_v = one_sided_traces(v0, grid)
    lo_w, up_w = one_sided_traces(w0, grid)
    jv, jw = up_v - lo_v, up_w - lo_w
    scale = max(1.0, float(np.max(np.abs(v0))), float(np.max(np.abs(w0))))
    return CompatibilityReport(
        tangential=tuple(tang), divergence=div, jump_v=jv, jump_w=jw,
        max_tangential=float(max(np.max(np.abs(t)) for t in tang)),
        max_divergence=float(np.max(np.abs(div))),
        max_jump=float(max(np.max(np.abs(jv)), np.max(np.abs(jw)))),
        scale=scale, tol=tol,
    )


__all__ = [
    "FlatState", "RhsTuple", "assemble_N", "linearize_N", "n_terms", "state_factors",
    "jump_pressure_r0", "check_compatibility", "CompatibilityReport", "deformation_tensor",
    "divergence_residual", "time_derivative_h", "SECOND_ORDER",
]
