"""Periodic-strip grids with a two-sided interface row at y=0.

Layout conventions used throughout the package:

* bulk fields have shape ``(..., Nx, 2*Ny)``.  Columns ``0..Ny-1`` hold the
  lower half-strip (y from -Ly up to 0-) and columns ``Ny..2*Ny-1`` the upper
  half-strip (0+ up to Ly).  The interface row is stored twice, once per side.
* pressure-type fields live on the cell midpoints of each half-strip and have
  shape ``(..., Nx, 2*Ny-2)``.
* interface fields have shape ``(..., Nx)``.

x is periodic and differentiated spectrally; y uses finite differences that
never reach across y=0.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


def fd_weights(z, nodes, m):
    """Fornberg's algorithm: weights for derivatives 0..m at ``z``.

    Returns an array of shape ``(m+1, len(nodes))``.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = nodes[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _side_diff_matrix(y, order):
    """Second-order FD matrix on one half-strip (one-sided at both ends)."""
    n = len(y)
    rows, cols, vals = [], [], []
    for j in range(n):
        if 0 < j < n - 1:
            idx = [j - 1, j, j + 1]
        elif order == 1:
            idx = [0, 1, 2] if j == 0 else [n - 3, n - 2, n - 1]
        else:
            idx = [0, 1, 2, 3] if j == 0 else [n - 4, n - 3, n - 2, n - 1]
        w = fd_weights(y[j], y[idx], order)[order]
        rows += [j] * len(idx)
        cols += idx
        vals += list(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _trapezoid_weights(y):
    w = np.zeros_like(y)
    d = np.diff(y)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the truncated strip and of the time interval.

    ``stretch`` > 0 clusters y nodes toward the interface through
    ``y = Ly*sinh(stretch*s)/sinh(stretch)``.
    """

    Nx: int = 64
    Lx: float = 2 * np.pi
    Ny: int = 32
    Ly: float = np.pi
    dt: float = 0.01
    t0: float = 0.5
    p_diag: float = 6.0
    stretch: float = 0.0

    def __post_init__(self):
        if self.Nx < 8 or self.Nx & (self.Nx - 1):
            raise ValueError(f"Nx must be a power of two >= 8, got {self.Nx}")
        if self.Ny < 8:
            raise ValueError(f"Ny must be >= 8, got {self.Ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("Lx and Ly must be positive")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t0 < self.dt * (1 - 1e-12):
            raise ValueError(f"t0={self.t0} must be >= dt={self.dt}")
        if abs(self.t0 / self.dt - round(self.t0 / self.dt)) > 1e-8:
            raise ValueError("t0 must be an integer multiple of dt")
        if not self.p_diag > 4:
            raise ValueError(f"p_diag must exceed 4, got {self.p_diag}")
        if self.stretch < 0:
            raise ValueError("stretch must be non-negative")

    def replace(self, **changes):
        fields = {f: getattr(self, f) for f in self.__dataclass_fields__}
        fields.update(changes)
        return GridSpec(**fields)

    # -- time ---------------------------------------------------------------
    @property
    def M(self):
        return int(round(self.t0 / self.dt))

    @cached_property
    def times(self):
        return self.dt * np.arange(self.M + 1)

    # -- x ------------------------------------------------------------------
    @property
    def dx(self):
        return self.Lx / self.Nx

    @cached_property
    def x(self):
        return self.dx * np.arange(self.Nx)

    @cached_property
    def k(self):
        """Wavenumbers of ``np.fft.rfft`` along x."""
        return 2 * np.pi * np.fft.rfftfreq(self.Nx, d=self.dx)

    # -- y ------------------------------------------------------------------
    @cached_property
    def y_upper(self):
        s = np.linspace(0.0, 1.0, self.Ny)
        if self.stretch > 0:
            s = np.sinh(self.stretch * s) / np.sinh(self.stretch)
        return self.Ly * s

    @cached_property
    def y_lower(self):
        return -self.y_upper[::-1]

    @cached_property
    def y(self):
        return np.concatenate([self.y_lower, self.y_upper])

    @cached_property
    def ym_lower(self):
        return 0.5 * (self.y_lower[1:] + self.y_lower[:-1])

    @cached_property
    def ym_upper(self):
        return 0.5 * (self.y_upper[1:] + self.y_upper[:-1])

    @cached_property
    def ym(self):
        return np.concatenate([self.ym_lower, self.ym_upper])

    @property
    def lo(self):
        return slice(0, self.Ny)

    @property
    def up(self):
        return slice(self.Ny, 2 * self.Ny)

    @property
    def plo(self):
        return slice(0, self.Ny - 1)

    @property
    def pup(self):
        return slice(self.Ny - 1, 2 * self.Ny - 2)

    @property
    def shape(self):
        return (self.Nx, 2 * self.Ny)

    @property
    def pshape(self):
        return (self.Nx, 2 * self.Ny - 2)

    @cached_property
    def hmin(self):
        return float(np.min(np.diff(self.y_upper)))

    @cached_property
    def sign_y(self):
        """-1 on lower nodes, +1 on upper nodes (interface copies included)."""
        return np.concatenate([-np.ones(self.Ny), np.ones(self.Ny)])

    # -- y operators ----------------------------------------------------------
    @cached_property
    def D1_lower(self):
        return _side_diff_matrix(self.y_lower, 1)

    @cached_property
    def D1_upper(self):
        return _side_diff_matrix(self.y_upper, 1)

    @cached_property
    def D2_lower(self):
        return _side_diff_matrix(self.y_lower, 2)

    @cached_property
    def D2_upper(self):
        return _side_diff_matrix(self.y_upper, 2)

    @cached_property
    def wy(self):
        """Trapezoid weights in y for bulk fields (both sides)."""
        return np.concatenate([_trapezoid_weights(self.y_lower), _trapezoid_weights(self.y_upper)])

    @cached_property
    def wym(self):
        """Midpoint-rule weights for pressure-row fields."""
        return np.concatenate([np.diff(self.y_lower), np.diff(self.y_upper)])

    @cached_property
    def pressure_interp(self):
        """Sparse map from midpoint values to node values (per side).

        Interior nodes interpolate linearly between neighbouring midpoints,
        end nodes extrapolate linearly from the two nearest midpoints.
        """
        blocks = []
        for yn, ym in ((self.y_lower, self.ym_lower), (self.y_upper, self.ym_upper)):
            n = len(yn)
            P = sp.lil_matrix((n, n - 1))
            for j in range(n):
                if j == 0:
                    idx = [0, 1]
                elif j == n - 1:
                    idx = [n - 3, n - 2]
                else:
                    idx = [j - 1, j]
                P[j, idx] = fd_weights(yn[j], ym[idx], 0)[0]
            blocks.append(P.tocsr())
        return sp.block_diag(blocks, format="csr")

    @cached_property
    def pressure_dy(self):
        """Sparse map from midpoint values to the y-derivative at nodes."""
        blocks = []
        for yn, ym in ((self.y_lower, self.ym_lower), (self.y_upper, self.ym_upper)):
            n = len(yn)
            P = sp.lil_matrix((n, n - 1))
            for j in range(n):
                if j == 0:
                    idx = [0, 1]
                elif j == n - 1:
                    idx = [n - 3, n - 2]
                else:
                    idx = [j - 1, j]
                P[j, idx] = fd_weights(yn[j], ym[idx], 1)[1]
            blocks.append(P.tocsr())
        return sp.block_diag(blocks, format="csr")

    @property
    def interface_pressure_weights(self):
        """(lower, upper) extrapolation weights of the interface pressure.

        Lower: weights on the last two lower midpoints; upper: weights on the
        first two upper midpoints.  Consistent with :attr:`pressure_interp`.
        """
        yl, yu = self.ym_lower[-2:], self.ym_upper[:2]
        return fd_weights(0.0, yl, 0)[0], fd_weights(0.0, yu, 0)[0]


def _apply_y(field, mat):
    """Apply a sparse matrix along the last axis of ``field``."""
    shp = field.shape
    flat = field.reshape(-1, shp[-1])
    out = (mat @ flat.T).T
    return np.asarray(out).reshape(shp[:-1] + (mat.shape[0],))


def _check_finite(field):
    if not np.all(np.isfinite(field)):
        raise ValueError("field contains non-finite values")


def ddx(field, grid, order=1, axis=-1):
    """Spectral x-derivative of a periodic field along ``axis``.

    Use ``axis=-1`` for interface fields and ``axis=-2`` for bulk fields.
    The Nyquist mode is dropped for odd orders.
    """
    field = np.asarray(field, dtype=float)
    _check_finite(field)
    n = field.shape[axis]
    if n != grid.Nx:
        raise ValueError(f"axis {axis} has length {n}, expected Nx={grid.Nx}")
    fh = np.fft.rfft(field, axis=axis)
    mult = (1j * grid.k) ** order
    if order % 2 == 1:
        mult = mult.copy()
        mult[-1] = 0.0
    shape = [1] * field.ndim
    shape[axis] = len(grid.k)
    fh = fh * mult.reshape(shape)
    return np.fft.irfft(fh, n=n, axis=axis)


def ddy(field, grid, order=1, side_aware=True):
    """Finite-difference y-derivative of a bulk field (last axis).

    With ``side_aware`` each half-strip is differentiated with its own nodes
    only, so values at y=0- and y=0+ are one-sided limits.  Without it the
    column is treated as one continuous function (upper interface copy used).
    """
    field = np.asarray(field, dtype=float)
    _check_finite(field)
    if field.shape[-1] != 2 * grid.Ny:
        raise ValueError("last axis must hold 2*Ny y-nodes")
    if grid.Ny < 3:
        raise ValueError("need at least 3 nodes per half-strip")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if not side_aware:
        yy = np.concatenate([grid.y_lower[:-1], grid.y_upper])
        col = np.concatenate([field[..., : grid.Ny - 1], field[..., grid.Ny:]], axis=-1)
        D = _side_diff_matrix(yy, order)
        d = _apply_y(col, D)
        return np.concatenate([d[..., : grid.Ny], d[..., grid.Ny - 1:]], axis=-1)
    Dl = grid.D1_lower if order == 1 else grid.D2_lower
    Du = grid.D1_upper if order == 1 else grid.D2_upper
    out = np.empty_like(field)
    out[..., grid.lo] = _apply_y(field[..., grid.lo], Dl)
    out[..., grid.up] = _apply_y(field[..., grid.up], Du)
    return out


def dy_midpoints(field, grid):
    """Compact difference of a bulk field, evaluated on the pressure rows."""
    lo = field[..., grid.lo]
    up = field[..., grid.up]
    dl = np.diff(lo, axis=-1) / np.diff(grid.y_lower)
    du = np.diff(up, axis=-1) / np.diff(grid.y_upper)
    return np.concatenate([dl, du], axis=-1)


def avg_midpoints(field, grid):
    """Average of neighbouring nodes, evaluated on the pressure rows."""
    lo = field[..., grid.lo]
    up = field[..., grid.up]
    return np.concatenate([0.5 * (lo[..., 1:] + lo[..., :-1]), 0.5 * (up[..., 1:] + up[..., :-1])], axis=-1)


def pressure_nodes(p, grid):
    """Midpoint pressure -> nodal bulk field (two-sided at y=0)."""
    return _apply_y(np.asarray(p, dtype=float), grid.pressure_interp)


def pressure_dy(p, grid):
    """y-derivative of a midpoint pressure, evaluated at the nodes."""
    return _apply_y(np.asarray(p, dtype=float), grid.pressure_dy)


def one_sided_traces(field, grid):
    """Return the (lower, upper) values at y=0 of a bulk field."""
    return field[..., grid.Ny - 1], field[..., grid.Ny]


def trace_jump(field, grid):
    """Interface trace and jump ``upper - lower`` of a bulk field.

    The returned trace is the upper-side value; for continuous fields both
    sides agree and this is the trace.  The lower trace is ``trace - jump``.
    """
    lower, upper = one_sided_traces(field, grid)
    return upper.copy(), upper - lower


def side_values(grid, lower, upper):
    """Piecewise-constant bulk coefficient (e.g. density or viscosity)."""
    out = np.empty(2 * grid.Ny)
    out[grid.lo] = lower
    out[grid.up] = upper
    return out


def integrate(field, grid, region="full", h=None):
    """Quadrature over the strip, one half-strip, or the interface graph.

    ``region`` is one of ``"full"``, ``"lower"``, ``"upper"`` or
    ``"interface"``.  Bulk fields use the periodic rectangle rule in x and the
    trapezoid rule per side in y.  The interface integral is taken along the
    graph ``y=h(x)`` and includes the metric factor sqrt(1+h'^2).
    """
    field = np.asarray(field, dtype=float)
    _check_finite(field)
    if region == "interface":
        if field.shape[-1] != grid.Nx:
            raise ValueError("interface integrals need an interface field")
        metric = 1.0 if h is None else np.sqrt(1.0 + ddx(h, grid) ** 2)
        return np.sum(field * metric, axis=-1) * grid.dx
    if region not in ("full", "lower", "upper"):
        raise ValueError(f"unknown region {region!r}")
    if field.shape[-1] == 2 * grid.Ny:
        w = grid.wy
    elif field.shape[-1] == 2 * grid.Ny - 2:
        w = grid.wym
    else:
        raise ValueError("bulk field has the wrong y-length")
    w = w.copy()
    half = len(w) // 2
    if region == "lower":
        w[half:] = 0.0
    elif region == "upper":
        w[:half] = 0.0
    return np.sum(field * w, axis=(-1, -2)) * grid.dx


def lp_norm(field, grid, p=2.0, region="full"):
    """Discrete L^p norm of a bulk or interface field (last axes)."""
    field = np.asarray(field, dtype=float)
    if field.shape[-1] == grid.Nx and field.ndim >= 1 and region == "interface":
        if np.isinf(p):
            return np.max(np.abs(field), axis=-1)
        return (np.sum(np.abs(field) ** p, axis=-1) * grid.dx) ** (1.0 / p)
    if np.isinf(p):
        return np.max(np.abs(field), axis=(-1, -2))
    return integrate(np.abs(field) ** p, grid, region) ** (1.0 / p)
