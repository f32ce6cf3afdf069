"""Verification studies: Taylor tests, convergence sweeps and identity checks.

Each study returns a :class:`StudyResult` holding a table (one row per
level, step size or eps) and named metrics with their tolerances.  The
harness serializes these; the acceptance tests call the same functions.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mms
from .geometry import FourierInterpolant, curvature, curvature_divergence
from .grid import GridSpec, lp_norm
from .rhs import assemble_N, assemble_N_along, linearize_N
from .scenario import base_control, control_direction, random_state
from .solver import solve_forward, solve_sensitivity
from .state import ControlData, FlatState
from .stokes import interface_residuals, stokes_solve
from .transform import physical_sensitivity, to_physical
from .vof import (
    MollifierSpec, delta_mollified_normal, mollified_normal, normal_identity, pair_measure,
    random_bumps, surface_tension_term, transport_area, vof_forward_residual, vof_sensitivity_residual,
)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# results

@dataclass
class Metric:
    value: float
    tolerance: str
    passed: bool

    def as_dict(self):
        v = self.value
        if isinstance(v, (float, np.floating)):
            v = float(v) if np.isfinite(v) else str(v)
        return {"value": v, "tolerance": self.tolerance, "pass": bool(self.passed)}


def at_most(v, tol):
    return Metric(float(v), f"<= {tol:g}", bool(v <= tol))


def at_least(v, tol):
    return Metric(float(v), f">= {tol:g}", bool(v >= tol))


def within(v, target, tol):
    return Metric(float(v), f"{target:g} +- {tol:g}", bool(abs(v - target) <= tol))


def is_true(flag, what):
    return Metric(bool(flag), what, bool(flag))


@dataclass
class StudyResult:
    columns: list
    rows: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(m.passed for m in self.metrics.values())


def threads():
    """Worker count from CAPFLOW_THREADS (default 1)."""
    try:
        n = int(os.environ.get("CAPFLOW_THREADS", "1"))
    except ValueError:
        raise ValueError("CAPFLOW_THREADS must be an integer") from None
    return max(1, n)


def _map(fn, items):
    n = threads()
    if n == 1 or len(items) < 2:
        return [fn(a) for a in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def fitted_slope(s, r):
    return mms.fitted_rate(np.asarray(s, dtype=float), np.asarray(r, dtype=float))


def is_monotone_decreasing(vals):
    return all(b < a for a, b in zip(vals[:-1], vals[1:]))


# ---------------------------------------------------------------------------
# Taylor tests

@dataclass
class TaylorReport:
    s: list
    remainders: list
    slope: float
    degenerate: bool
    divided: list = field(default_factory=list)
    divided_slope: float = float("nan")


def physical_norm(u, w, grid, p):
    """Discrete C(J; L^p) norm of a physical velocity trajectory."""
    per_level = (lp_norm(u, grid, p) ** p + lp_norm(w, grid, p) ** p) ** (1.0 / p)
    return float(np.max(per_level))


def taylor_test(ctrl, dctrl, grid, params, s_values, tol=1e-12, physical=False, z=None):
    """Remainders ||z(u + s d) - z(u) - s dz|| for each s, and the fitted slope.

    With ``physical`` the divided differences ((u^s - u)/s - du) of the
    physical velocity are also measured in the C(J; L^p_diag) norm.
    """
    if z is None:
        z, _ = solve_forward(ctrl, grid, params, tol=tol)
    dz, _ = solve_sensitivity(z, ctrl, dctrl, grid, params, tol=tol)

    def shifted(s):
        c = ctrl.c
        if dctrl.c is not None:
            c = s * dctrl.c if c is None else c + s * dctrl.c
        return ControlData(ctrl.v0 + s * dctrl.v0, ctrl.w0 + s * dctrl.w0, ctrl.h0, c, ctrl.kind)

    def run(s):
        zs, _ = solve_forward(shifted(s), grid, params, tol=tol)
        return zs

    sols = _map(run, list(s_values))
    rem = [(zs - z - dz * s).norm(grid) for s, zs in zip(s_values, sols)]
    degenerate = all(r == 0.0 for r in rem)
    slope = float("nan") if degenerate or min(rem) <= 0 else fitted_slope(s_values, rem)
    rep = TaylorReport(list(map(float, s_values)), rem, slope, degenerate)
    if physical:
        p = grid.p_diag
        u, w = to_physical(z.v, z.h, grid), to_physical(z.w, z.h, grid)
        du = physical_sensitivity(z.v, dz.v, z.h, dz.h, grid)
        dw = physical_sensitivity(z.w, dz.w, z.h, dz.h, grid)
        div = []
        for s, zs in zip(s_values, sols):
            us, ws = to_physical(zs.v, zs.h, grid), to_physical(zs.w, zs.h, grid)
            div.append(physical_norm((us - u) / s - du, (ws - w) / s - dw, grid, p))
        rep.divided = div
        rep.divided_slope = float("nan") if min(div) <= 0 else fitted_slope(s_values, div)
    return rep


def taylor_study(grid, params, kind="flat", seed=0, n_directions=3, s_values=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3),
                 amplitude=0.5, h0_amplitude=0.01, direction_scale=1.0, tol=1e-12):
    ctrl = base_control(grid, kind, amplitude, h0_amplitude, seed)
    rng = np.random.default_rng(seed + 1)
    z, _ = solve_forward(ctrl, grid, params, tol=tol)
    res = StudyResult(["direction", "s", "remainder", "divided_physical"])
    physical = kind == "physical"
    for i in range(n_directions):
        d = control_direction(grid, rng, kind, direction_scale)
        rep = taylor_test(ctrl, d, grid, params, s_values, tol=tol, physical=physical, z=z)
        div = rep.divided if physical else [float("nan")] * len(rep.s)
        for s, r, q in zip(rep.s, rep.remainders, div):
            res.rows.append((i, s, r, q))
        if rep.degenerate:
            res.metrics[f"slope_{i}"] = Metric("degenerate", "remainders all zero", True)
        else:
            res.metrics[f"slope_{i}"] = within(rep.slope, 2.0, 0.1)
        if physical and not rep.degenerate:
            res.metrics[f"physical_slope_{i}"] = at_least(rep.divided_slope, 0.9)
    return res


# ---------------------------------------------------------------------------
# operator checks

def curvature_study(Nx=256, amplitude=0.2):
    g = GridSpec(Nx=Nx)
    h = amplitude * np.cos(g.x)
    err = float(np.max(np.abs(curvature(h, g) - curvature_divergence(h, g))))
    res = StudyResult(["Nx", "max_difference"], [(Nx, err)])
    res.metrics["curvature_identity"] = at_most(err, 1e-6)
    return res


def n_structure_study(grid, params, seed=0, s_values=None):
    s_values = np.logspace(-4, -1, 7) if s_values is None else np.asarray(s_values)
    zero = assemble_N(FlatState.zeros(grid, grid.M + 1), params, grid)
    z = random_state(grid, np.random.default_rng(seed))
    norms = [assemble_N(z * s, params, grid).norm(grid) for s in s_values]
    res = StudyResult(["s", "norm_N"], [(float(s), n) for s, n in zip(s_values, norms)])
    res.metrics["N_of_zero"] = at_most(zero.max_abs(), 0.0)
    res.metrics["quadratic_slope"] = within(fitted_slope(s_values, norms), 2.0, 0.1)
    return res


def linearization_study(grid, params, seed=0, n_directions=5, amplitude=0.3, s_values=None):
    s_values = np.logspace(-4, -1, 7) if s_values is None else np.asarray(s_values)
    rng = np.random.default_rng(seed)
    z = random_state(grid, rng, amplitude)
    N0 = assemble_N(z, params, grid)
    res = StudyResult(["direction", "s", "remainder"])
    for i in range(n_directions):
        dz = random_state(grid, rng)
        dN = linearize_N(z, dz, params, grid)
        along = assemble_N_along(z, dz, s_values, params, grid)
        rem = [(Ns - N0 - dN * s).norm(grid) for s, Ns in zip(s_values, along)]
        res.rows += [(i, float(s), r) for s, r in zip(s_values, rem)]
        res.metrics[f"slope_{i}"] = within(fitted_slope(s_values, rem), 2.0, 0.1)
    return res


# ---------------------------------------------------------------------------
# convergence studies

def mms_study(params, Nx=16, t0=0.5, ny_levels=(9, 17, 33, 65), dt_levels=(0.05, 0.025, 0.0125, 0.00625),
              spatial_dt=0.05, temporal_ny=17):
    res = StudyResult(["kind", "level", "step", "error", "interface_residual"])
    jump_max = 0.0
    for kind, grids in (
        ("spatial", [GridSpec(Nx=Nx, Ny=n, dt=spatial_dt, t0=t0) for n in ny_levels]),
        ("temporal", [GridSpec(Nx=Nx, Ny=temporal_ny, dt=d, t0=t0) for d in dt_levels]),
    ):
        steps, errs = [], []
        for lev, g in enumerate(grids):
            ex = getattr(mms, kind)(g.Ly)
            R = ex.data(g, params)
            v0, w0, h0 = ex.initial(g)
            # the spatial solution is compatible only up to O(dy^2)
            z = stokes_solve(R, v0, w0, h0, g, params, check_compat=(kind == "temporal"))
            err = mms.solution_error(z, ex.state(g))
            ir = max(float(np.max(a)) for a in interface_residuals(z, R, g, params).values())
            jump_max = max(jump_max, ir)
            step = g.Ly / (g.Ny - 1) if kind == "spatial" else g.dt
            steps.append(step)
            errs.append(err)
            res.rows.append((kind, lev, step, err, ir))
        rate = mms.fitted_rate(steps, errs)
        res.metrics[f"{kind}_rate"] = at_least(rate, 1.8 if kind == "spatial" else 0.9)
    res.metrics["interface_residual"] = at_most(jump_max, 1e-8)
    return res


def mollifier_study(eps_values=(0.2, 0.1, 0.05, 0.025), amplitude=0.1, delta=0.25, n_points=32, Nx=64):
    g = GridSpec(Nx=Nx)
    hI = FourierInterpolant(amplitude * np.cos(g.x), g.Lx)
    dhI = FourierInterpolant(amplitude * (0.5 * np.sin(2 * g.x) + 0.3), g.Lx)
    xs = np.linspace(0, g.Lx, n_points, endpoint=False)
    ys = hI(xs)
    exact = np.stack([-hI(xs, 1), np.ones_like(xs)])
    dexact = np.stack([-dhI(xs, 1), np.zeros_like(xs)])
    res = StudyResult(["eps", "normal_error", "variation_error"])
    e1, e2 = [], []
    for eps in eps_values:
        spec = MollifierSpec(delta=delta, eps=eps)
        e1.append(float(np.max(np.abs(mollified_normal(hI, spec, xs, ys) - exact))))
        e2.append(float(np.max(np.abs(delta_mollified_normal(hI, dhI, spec, xs, ys) - dexact))))
        res.rows.append((eps, e1[-1], e2[-1]))
    res.metrics["normal_rate"] = at_least(fitted_slope(eps_values, e1), 0.9)
    res.metrics["variation_rate"] = at_least(fitted_slope(eps_values, e2), 0.9)
    return res


def weak_identity_study(n_tests=20, seed=0, amplitude=0.2, sigma=1.0, Nx=64):
    g = GridSpec(Nx=Nx)
    hI = FourierInterpolant(amplitude * np.cos(g.x) + 0.05 * amplitude * np.sin(3 * g.x), g.Lx)
    dhI = FourierInterpolant(0.1 * np.sin(2 * g.x) + 0.05, g.Lx)
    rng = np.random.default_rng(seed)
    res = StudyResult(["test", "normal", "gradient_pairing", "surface"])
    worst = {"normal": 0.0, "gradient_pairing": 0.0, "surface": 0.0}
    for i, b in enumerate(random_bumps(rng, n_tests, g.Lx)):
        a, c = normal_identity(hI, b)
        p, q = pair_measure(b, hI, dhI, "gradient")
        s1 = surface_tension_term(hI, b, sigma, "curvature")
        s2 = surface_tension_term(hI, b, sigma, "byparts")
        row = {"normal": abs(a - c), "gradient_pairing": abs(p - q), "surface": abs(s1 - s2)}
        for k, v in row.items():
            worst[k] = max(worst[k], v)
        res.rows.append((i, row["normal"], row["gradient_pairing"], row["surface"]))
    for k, v in worst.items():
        res.metrics[k] = at_most(v, 1e-8)
    return res


DEFAULT_VOF_LEVELS = ((32, 24, 20, 0.4), (64, 48, 40, 0.2), (128, 96, 80, 0.1))


def _vof_solve(level, params, seed, amplitude, h0_amplitude, t0, sensitivity):
    Nx, Ny, M, eps = level
    g = GridSpec(Nx=Nx, Ny=Ny, dt=t0 / M, t0=t0)
    ctrl = base_control(g, "flat", amplitude, h0_amplitude, seed)
    z, _ = solve_forward(ctrl, g, params)
    dz = dctrl = None
    if sensitivity:
        dctrl = control_direction(g, np.random.default_rng(seed + 1))
        dz, _ = solve_sensitivity(z, ctrl, dctrl, g, params)
    return g, ctrl, z, dctrl, dz


def vof_study(params, kind="forward", levels=DEFAULT_VOF_LEVELS, seed=0, amplitude=2.0, h0_amplitude=0.05,
              t0=0.5, n_tests=4, delta=0.25):
    """Weak-form residuals over simultaneous (grid, eps) refinement."""
    tests = random_bumps(np.random.default_rng(seed + 7), n_tests, space_time=True, t0=t0)
    res = StudyResult(["level", "Nx", "Ny", "M", "eps", "momentum", "divergence", "residual"])
    sens = kind == "sensitivity"

    def run(level):
        g, ctrl, z, dctrl, dz = _vof_solve(level, params, seed, amplitude, h0_amplitude, t0, sens)
        spec = MollifierSpec(delta=delta, eps=level[3])
        if sens:
            out = [vof_sensitivity_residual(z, dz, g, params, b, spec, ctrl.c, dctrl.c) for b in tests]
        else:
            out = [vof_forward_residual(z, g, params, b, spec, ctrl.c) for b in tests]
        return max(o["momentum"] for o in out), max(o["divergence"] for o in out)

    vals = _map(run, list(levels))
    resid = []
    for i, (level, (mom, div)) in enumerate(zip(levels, vals)):
        resid.append(max(mom, div))
        res.rows.append((i,) + tuple(level) + (mom, div, resid[-1]))
    res.metrics["monotone"] = is_true(is_monotone_decreasing(resid), "strictly decreasing")
    res.metrics["final_residual"] = at_most(resid[-1], 1e-2)
    return res


def transport_study(params, levels=((32, 24, 20), (64, 48, 40), (128, 96, 80)), seed=0, amplitude=2.0,
                    h0_amplitude=0.05, t0=0.5):
    res = StudyResult(["level", "Nx", "Ny", "M", "area", "bound"])

    def run(level):
        Nx, Ny, M = level
        g = GridSpec(Nx=Nx, Ny=Ny, dt=t0 / M, t0=t0)
        z, _ = solve_forward(base_control(g, "flat", amplitude, h0_amplitude, seed), g, params)
        return g, max(transport_area(z, g, [g.M // 2, g.M]))

    out = _map(run, list(levels))
    areas = []
    for i, (level, (g, a)) in enumerate(zip(levels, out)):
        areas.append(a)
        res.rows.append((i,) + tuple(level) + (a, 2 * g.dx * g.Lx))
    g = out[-1][0]
    res.metrics["finest_area"] = at_most(areas[-1], 2 * g.dx * g.Lx)
    res.metrics["decay_rate"] = at_least(fitted_slope([t0 / lv[2] for lv in levels], areas), 0.9)
    res.metrics["monotone"] = is_true(is_monotone_decreasing(areas), "strictly decreasing")
    return res


def smoke_study(grid, params):
    z, rep = solve_forward(ControlData.zeros(grid), grid, params)
    res = StudyResult(["level", "max_v", "max_w", "max_h"])
    for m in range(grid.M + 1):
        res.rows.append((m, float(np.max(np.abs(z.v[m]))), float(np.max(np.abs(z.w[m]))),
                         float(np.max(np.abs(z.h[m])))))
    res.metrics["zero_state"] = at_most(z.max_abs(), 0.0)
    res.info["iterations"] = rep.iterations
    return res
