"""Containers for material parameters, flat states and right-hand sides.

All trajectories carry a leading time axis of length M+1.  Velocities live on
the two-sided node grid, pressure and the divergence datum on the midpoint
rows, interface quantities on the x grid.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np


@dataclass(frozen=True)
class PhysicalParams:
    rho1: float = 1.0
    rho2: float = 1.0
    mu1: float = 1.0
    mu2: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{f.name} must be positive, got {val}")

    def rho_nodes(self, grid):
        return np.concatenate([np.full(grid.Ny, self.rho1), np.full(grid.Ny, self.rho2)])

    def mu_nodes(self, grid):
        return np.concatenate([np.full(grid.Ny, self.mu1), np.full(grid.Ny, self.mu2)])


class _Tuple:
    """Vector-space arithmetic over the array fields of a dataclass."""

    def arrays(self):
        return [getattr(self, f.name) for f in fields(self)]

    def _map(self, fn, other=None):
        if other is None:
            return replace(self, **{f.name: fn(getattr(self, f.name)) for f in fields(self)})
        return replace(self, **{f.name: fn(getattr(self, f.name), getattr(other, f.name)) for f in fields(self)})

    def __add__(self, other):
        return self._map(np.add, other)

    def __sub__(self, other):
        return self._map(np.subtract, other)

    def __mul__(self, a):
        return self._map(lambda x: a * x)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def copy(self):
        return self._map(np.array)

    def max_abs(self):
        return max(float(np.max(np.abs(a))) if a.size else 0.0 for a in self.arrays())

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def level(self, m):
        return self._map(lambda x: x[m])


@dataclass(frozen=True, eq=False)
class FlatState(_Tuple):
    """(v, w, pi, r, h) in flat coordinates; ``p`` sits on midpoint rows."""

    v: np.ndarray
    w: np.ndarray
    p: np.ndarray
    r: np.ndarray
    h: np.ndarray

    @classmethod
    def zeros(cls, grid, levels=None):
        lead = () if levels is None else (levels,)
        return cls(
            v=np.zeros(lead + grid.shape),
            w=np.zeros(lead + grid.shape),
            p=np.zeros(lead + grid.pshape),
            r=np.zeros(lead + (grid.Nx,)),
            h=np.zeros(lead + (grid.Nx,)),
        )

    def norm(self, grid):
        """Discrete L2-in-space, max-in-time norm used for Picard updates."""
        def l2(a, wy):
            return np.sqrt(np.sum(a * a * wy, axis=(-1, -2)) * grid.dx)

        def l2i(a):
            return np.sqrt(np.sum(a * a, axis=-1) * grid.dx)

        parts = [l2(self.v, grid.wy), l2(self.w, grid.wy), l2(self.p, grid.wym), l2i(self.r), l2i(self.h)]
        return float(np.max(np.sqrt(sum(np.asarray(q) ** 2 for q in parts))))


@dataclass(frozen=True, eq=False)
class RhsTuple(_Tuple):
    """(f_v, f_w, f_d, g_v, g_w, g_h); ``fd`` sits on midpoint rows."""

    fv: np.ndarray
    fw: np.ndarray
    fd: np.ndarray
    gv: np.ndarray
    gw: np.ndarray
    gh: np.ndarray

    @classmethod
    def zeros(cls, grid, levels=None):
        lead = () if levels is None else (levels,)
        return cls(
            fv=np.zeros(lead + grid.shape),
            fw=np.zeros(lead + grid.shape),
            fd=np.zeros(lead + grid.pshape),
            gv=np.zeros(lead + (grid.Nx,)),
            gw=np.zeros(lead + (grid.Nx,)),
            gh=np.zeros(lead + (grid.Nx,)),
        )

    def with_force(self, c):
        """Add a flat body force ``c = (c_v, c_w)`` to the momentum data."""
        if c is None:
            return self
        return replace(self, fv=self.fv + c[0], fw=self.fw + c[1])

    def norm(self, grid):
        def l2(a, wy):
            return np.sqrt(np.sum(a * a * wy, axis=(-1, -2)) * grid.dx)

        def l2i(a):
            return np.sqrt(np.sum(a * a, axis=-1) * grid.dx)

        parts = [l2(self.fv, grid.wy), l2(self.fw, grid.wy), l2(self.fd, grid.wym),
                 l2i(self.gv), l2i(self.gw), l2i(self.gh)]
        return float(np.max(np.sqrt(sum(np.asarray(q) ** 2 for q in parts))))


@dataclass(frozen=True, eq=False)
class ControlData:
    """Initial data and distributed control.

    ``kind`` is ``"flat"`` (``c`` already in flat coordinates) or
    ``"physical"`` (``c`` is pulled back along the current interface).
    ``c`` has shape ``(2, M+1, Nx, 2Ny)`` or is None.
    """

    v0: np.ndarray
    w0: np.ndarray
    h0: np.ndarray
    c: np.ndarray | None = None
    kind: str = "flat"

    def __post_init__(self):
        if self.kind not in ("flat", "physical"):
            raise ValueError(f"unknown control kind {self.kind!r}")

    @classmethod
    def zeros(cls, grid, kind="flat"):
        return cls(np.zeros(grid.shape), np.zeros(grid.shape), np.zeros(grid.Nx), None, kind)
