"""Maps between physical coordinates and flat-interface coordinates.

Flat fields are sampled on the two-sided grid of :class:`GridSpec`; physical
fields use the same array layout, but there the interface sits at y = h(x)
instead of y = 0.  All column interpolation is cubic Lagrange with stencils
that never straddle the interface (y=0 for flat fields, y=h for physical
fields), so piecewise-smooth fields with kinks or jumps are handled per phase.
"""
from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)


def _lagrange_weights(nodes, xq, deriv=0):
    """Weights of 4-point Lagrange interpolation (or its derivative).

    ``nodes`` has shape ``(..., 4)``, ``xq`` shape ``(...)``.
    """
    w = np.zeros(nodes.shape)
    for i in range(4):
        den = np.ones(xq.shape)
        for j in range(4):
            if j != i:
                den = den * (nodes[..., i] - nodes[..., j])
        if deriv == 0:
            num = np.ones(xq.shape)
            for j in range(4):
                if j != i:
                    num = num * (xq - nodes[..., j])
        else:
            num = np.zeros(xq.shape)
            for m in range(4):
                if m == i:
                    continue
                term = np.ones(xq.shape)
                for j in range(4):
                    if j != i and j != m:
                        term = term * (xq - nodes[..., j])
                num = num + term
        w[..., i] = num / den
    return w


def _gather_interp(src_y, src_f, yq, start, deriv=0):
    """Evaluate the 4-point interpolant starting at node ``start``.

    ``src_f`` has shape ``(..., n)``; ``yq`` and ``start`` broadcast against
    ``src_f.shape[:-1] + (nq,)``.
    """
    out_shape = np.broadcast_shapes(src_f.shape[:-1] + (1,), yq.shape, start.shape)
    yq = np.broadcast_to(yq, out_shape)
    start = np.broadcast_to(start, out_shape)
    f = np.broadcast_to(src_f, out_shape[:-1] + (src_f.shape[-1],))
    offs = np.arange(4)
    idx = start[..., None] + offs
    nodes = src_y[idx]
    w = _lagrange_weights(nodes, yq, deriv)
    vals = np.stack([np.take_along_axis(f, idx[..., m], axis=-1) for m in range(4)], axis=-1)
    return np.sum(w * vals, axis=-1)


def _clamp(yq, lo, hi, what):
    """Clip query points to the strip; returns (clipped, outside mask)."""
    bad = (yq < lo) | (yq > hi)
    if np.any(bad):
        log.debug("%s: clamped %d evaluation points to the strip", what, int(np.sum(bad)))
        yq = np.clip(yq, lo, hi)
    return yq, bad


def _interval(src_y, yq):
    return np.searchsorted(src_y, yq, side="right") - 1


def _flat_eval(fhat, eta, lower_mask, grid, deriv=0):
    """Evaluate a flat bulk field at offsets ``eta`` from the interface."""
    Ny = grid.Ny
    eta, bad = _clamp(eta, -grid.Ly, grid.Ly, "flat evaluation")
    yl, yu = grid.y_lower, grid.y_upper
    sl = np.clip(_interval(yl, eta) - 1, 0, Ny - 4)
    su = np.clip(_interval(yu, eta) - 1, 0, Ny - 4)
    vl = _gather_interp(yl, fhat[..., :Ny], eta, sl, deriv)
    vu = _gather_interp(yu, fhat[..., Ny:], eta, su, deriv)
    out = np.where(lower_mask, vl, vu)
    # clamped points are frozen at the wall value, so their derivative is 0
    return np.where(bad, 0.0, out) if deriv else out


def _physical_column(grid):
    """Deduplicated physical node coordinates (the y=0 row kept once)."""
    return np.concatenate([grid.y_lower[:-1], grid.y_upper])


def _dedup(u, grid):
    return np.concatenate([u[..., : grid.Ny - 1], u[..., grid.Ny:]], axis=-1)


def _physical_eval(u, yq, h, lower_mask, grid, split=True, deriv=0):
    """Evaluate a physical bulk field at heights ``yq`` per column.

    With ``split`` the lower phase (y<h) only uses nodes with y<=h and the
    upper phase only nodes with y>=h.
    """
    ys = _physical_column(grid)
    n = len(ys)
    f = _dedup(np.asarray(u, dtype=float), grid)
    yq, bad = _clamp(yq, -grid.Ly, grid.Ly, "physical evaluation")
    i = _interval(ys, yq)
    if not split:
        s = np.clip(i - 1, 0, n - 4)
        out = _gather_interp(ys, f, yq, s, deriv)
        return np.where(bad, 0.0, out) if deriv else out
    hcol = np.asarray(h)[..., None]
    iL = np.maximum(np.searchsorted(ys, hcol, side="right") - 1, 3)
    iU = np.minimum(np.searchsorted(ys, hcol, side="left"), n - 4)
    sl = np.clip(i - 1, 0, iL - 3)
    su = np.clip(i - 1, iU, n - 4)
    vl = _gather_interp(ys, f, yq, sl, deriv)
    vu = _gather_interp(ys, f, yq, su, deriv)
    out = np.where(lower_mask, vl, vu)
    return np.where(bad, 0.0, out) if deriv else out


def _lower_flat_mask(grid):
    return np.arange(2 * grid.Ny) < grid.Ny


def to_physical(fhat, h, grid, deriv=0):
    """Push a flat field forward: u(x, y) = u_hat(x, y - h(x)).

    ``fhat`` has shape ``(..., Nx, 2Ny)`` and ``h`` shape ``(..., Nx)``
    (leading axes broadcast).  Output nodes with y<h take the lower-side
    interpolant, y>h the upper one; at y==h the duplicated row keeps its side.
    ``deriv=1`` returns the y-derivative of the same interpolant.
    """
    fhat = np.asarray(fhat, dtype=float)
    h = np.asarray(h, dtype=float)
    eta = grid.y - h[..., None]
    lower = (eta < 0) | ((eta == 0) & _lower_flat_mask(grid))
    return _flat_eval(fhat, eta, lower, grid, deriv)


def to_flat(u, h, grid, split=True, deriv=0):
    """Pull a physical field back: u_hat(x, y) = u(x, h(x) + y).

    With ``split`` the interpolation is one-sided about y=h so the two flat
    copies of the interface row carry the two one-sided limits.
    """
    u = np.asarray(u, dtype=float)
    h = np.asarray(h, dtype=float)
    yq = grid.y + h[..., None]
    lower = _lower_flat_mask(grid)
    return _physical_eval(u, yq, h, lower, grid, split=split, deriv=deriv)


def _reflect_sample(src_y, src_f, yq, lo, hi):
    """Cubic samples of a half-strip field; zero outside ``[lo, hi]``."""
    inside = (yq >= lo - 1e-14) & (yq <= hi + 1e-14)
    yc = np.clip(yq, lo, hi)
    n = len(src_y)
    s = np.clip(_interval(src_y, yc) - 1, 0, n - 4)
    return np.where(inside, _gather_interp(src_y, src_f, yc, s), 0.0)


REFLECT = ((1, 6.0), (2, -8.0), (3, 3.0))


def extend_half_fields(fhat, grid):
    """Reflection extensions of both half-strip fields to the whole strip.

    Returns ``(f_minus, f_plus)``: ``f_minus`` equals ``fhat`` on the lower
    nodes and ``sum_j a_j f(-j*y)`` on the upper nodes, with coefficients
    (6, -8, 3) reproducing polynomials of degree <= 2.  Samples that fall
    beyond the wall are continued by zero.
    """
    fhat = np.asarray(fhat, dtype=float)
    Ny = grid.Ny
    yl, yu = grid.y_lower, grid.y_upper
    fl, fu = fhat[..., :Ny], fhat[..., Ny:]
    ext_up = sum(a * _reflect_sample(yl, fl, -j * yu, -grid.Ly, 0.0) for j, a in REFLECT)
    ext_lo = sum(a * _reflect_sample(yu, fu, -j * yl, 0.0, grid.Ly) for j, a in REFLECT)
    f_minus = np.concatenate([fl, ext_up], axis=-1)
    f_plus = np.concatenate([ext_lo, fu], axis=-1)
    return f_minus, f_plus


def physical_sensitivity(uhat, duhat, h, dh, grid):
    """delta u = du_hat(x, y-h) - d_y u_hat(x, y-h) * delta h, per phase."""
    dh = np.asarray(dh, dtype=float)
    return to_physical(duhat, h, grid) - to_physical(uhat, h, grid, deriv=1) * dh[..., None]


def pullback_control(c, h, grid, with_derivative=False, dc=None, dh=None):
    """Control in flat coordinates, c_hat(x, y) = c(x, y + h(x)).

    The control carries no interface structure, so the interpolation is not
    split.  With ``with_derivative`` also returns
    ``dc(x, y+h) + d_y c(x, y+h) * dh``.
    """
    c = np.asarray(c, dtype=float)
    h = np.asarray(h, dtype=float)
    ch = to_flat(c, h, grid, split=False)
    if not with_derivative:
        return ch
    dch = np.zeros_like(ch)
    if dc is not None:
        dch = dch + to_flat(dc, h, grid, split=False)
    if dh is not None:
        dh = np.asarray(dh, dtype=float)
        dch = dch + to_flat(c, h, grid, split=False, deriv=1) * dh[..., None]
    return ch, dch
