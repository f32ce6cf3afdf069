"""Picard iteration for the transformed problem and its linearization.

Forward:      z^{k+1} = S(N(z^k) + (c_hat_k, 0); u0, h0)
Sensitivity:  dz^{k+1} = S(DN(z)[dz^k] + (dc_hat_k, 0); du0, 0)

where S is the linear Stokes solve.  In physical-control mode the control is
pulled back along the current interface at every iteration, and its
variation picks up the term d_y c(x, y+h) * dh.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import curvature
from .rhs import assemble_N, jump_pressure_r0, linearize_N
from .state import FlatState, RhsTuple
from .stokes import apply_stokes_operator, stokes_solve
from .transform import pullback_control, to_flat

log = logging.getLogger(__name__)

ROUNDOFF_FLOOR = 1e-11


@dataclass
class ContractionReport:
    iterations: int = 0
    updates: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    converged: bool = False
    final_residual: float = float("nan")
    stagnated: bool = False

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "updates": [float(u) for u in self.updates],
            "ratios": [float(r) for r in self.ratios],
            "converged": bool(self.converged),
            "final_residual": float(self.final_residual),
            "stagnated": bool(self.stagnated),
        }


class FixedPointError(RuntimeError):
    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


def _interior_mask(grid):
    m = np.ones(2 * grid.Ny, dtype=bool)
    m[[0, grid.Ny - 1, grid.Ny, 2 * grid.Ny - 1]] = False
    return m


def _drop_nyquist(a, axis):
    f = np.fft.rfft(a, axis=axis)
    idx = [slice(None)] * a.ndim
    idx[axis] = -1
    f[tuple(idx)] = 0.0
    return np.fft.irfft(f, n=a.shape[axis], axis=axis)


def operator_residual(z, rhs, grid, params):
    """L2-type norm of L z - rhs over the rows the solver actually imposes.

    The solver discards the Nyquist mode of its data, so it is removed from
    ``rhs`` before comparing.
    """
    L = apply_stokes_operator(z, grid, params)
    rhs = RhsTuple(*(_drop_nyquist(a, -2 if a.ndim == 3 else -1) for a in rhs.arrays()))
    d = L - rhs
    inner = _interior_mask(grid)
    parts = [
        d.fv[1:][..., inner], d.fw[1:][..., inner], d.fd[1:],
        d.gv[1:], d.gw[1:], d.gh[:-1],
    ]
    return float(np.sqrt(sum(np.sum(p * p) for p in parts) * grid.dx * grid.hmin / max(grid.M, 1)))


def control_in_flat(ctrl, h, grid):
    """Flat control for the current interface trajectory ``h``."""
    if ctrl.c is None:
        return None
    if ctrl.kind == "flat":
        return ctrl.c
    return pullback_control(ctrl.c, h, grid)


def _initial_guess(ctrl, grid, params):
    z = FlatState.zeros(grid, grid.M + 1)
    z.v[:] = ctrl.v0
    z.w[:] = ctrl.w0
    z.h[:] = ctrl.h0
    z.r[:] = jump_pressure_r0(ctrl.v0, ctrl.w0, ctrl.h0, params, grid)
    return z


def _picard(step, z, grid, tol, kmax, what):
    rep = ContractionReport()
    prev = None
    for k in range(kmax):
        znew = step(z, k)
        if not znew.is_finite():
            rep.iterations = k + 1
            raise FixedPointError(f"{what}: non-finite iterate at iteration {k + 1}", rep)
        upd = (znew - z).norm(grid)
        scale = max(znew.norm(grid), 1e-300)
        rep.updates.append(upd)
        if prev is not None and prev > 0:
            rep.ratios.append(upd / prev)
        prev = upd
        z = znew
        rep.iterations = k + 1
        log.debug("%s iteration %d: update %.3e (relative %.3e)", what, k + 1, upd, upd / scale)
        if upd <= tol * scale or upd == 0.0:
            rep.converged = True
            break
        if len(rep.ratios) >= 2 and min(rep.ratios[-2:]) > 0.5 and upd <= ROUNDOFF_FLOOR * scale:
            # updates stagnate at rounding level; tighter tol is unattainable
            rep.converged = True
            rep.stagnated = True
            break
    return z, rep


def solve_forward(ctrl, grid, params, tol=1e-10, kmax=50, z_init=None):
    """Solve L z = N(z) + (c_hat, 0), (u(0), h(0)) = (u0, h0) by Picard."""
    if ctrl.c is not None and not np.all(np.isfinite(ctrl.c)):
        raise ValueError("control contains non-finite values")
    z0 = _initial_guess(ctrl, grid, params) if z_init is None else z_init

    def step(z, k):
        c = control_in_flat(ctrl, z.h, grid)
        rhs = assemble_N(z, params, grid).with_force(c)
        return stokes_solve(rhs, ctrl.v0, ctrl.w0, ctrl.h0, grid, params, check_compat=(k == 0))

    z, rep = _picard(step, z0, grid, tol, kmax, "forward")
    c = control_in_flat(ctrl, z.h, grid)
    rep.final_residual = operator_residual(z, assemble_N(z, params, grid).with_force(c), grid, params)
    if not rep.converged:
        raise FixedPointError(f"forward Picard did not converge in {kmax} iterations", rep)
    return z, rep


def solve_sensitivity(z, ctrl, dctrl, grid, params, tol=1e-10, kmax=50, dz_init=None):
    """Differentiated fixed point in the direction ``dctrl``.

    ``dctrl`` is a :class:`ControlData` holding (du0, dh0, dc); its ``kind``
    must match ``ctrl``.  Directions that move h0 are rejected.
    """
    if dctrl.h0 is not None and np.any(dctrl.h0 != 0):
        raise ValueError("sensitivity directions with dh0 != 0 are not supported")
    if dctrl.kind != ctrl.kind:
        raise ValueError("control kinds of base point and direction differ")
    h0 = ctrl.h0
    mode_phys = ctrl.kind == "physical"
    dc_base = None
    if dctrl.c is not None:
        dc_base = to_flat(dctrl.c, z.h, grid, split=False) if mode_phys else dctrl.c
    dcy = None
    if mode_phys and ctrl.c is not None:
        dcy = to_flat(ctrl.c, z.h, grid, split=False, deriv=1)

    def dcontrol(dz):
        dc = dc_base
        if dcy is not None:
            extra = dcy * dz.h[..., None]
            dc = extra if dc is None else dc + extra
        return dc

    dr0 = jump_pressure_r0(dctrl.v0, dctrl.w0, h0, params, grid) - params.sigma * curvature(h0, grid)
    start = FlatState.zeros(grid, grid.M + 1) if dz_init is None else dz_init

    def step(dz, k):
        rhs = linearize_N(z, dz, params, grid).with_force(dcontrol(dz))
        out = stokes_solve(rhs, dctrl.v0, dctrl.w0, np.zeros(grid.Nx), grid, params, check_compat=False)
        out.r[0] = dr0
        return out

    dz, rep = _picard(step, start, grid, tol, kmax, "sensitivity")
    rep.final_residual = operator_residual(
        dz, linearize_N(z, dz, params, grid).with_force(dcontrol(dz)), grid, params)
    if not rep.converged:
        raise FixedPointError(f"sensitivity Picard did not converge in {kmax} iterations", rep)
    return dz, rep
