"""Seeded data builders shared by the studies, tests and demos."""
from __future__ import annotations

import numpy as np

from .state import ControlData, FlatState


def bump_field(grid, x0, y0, r):
    """Radial C^2 bump (1 - d^2/r^2)^3 on the node grid, periodic in x."""
    X = grid.x[:, None]
    Y = grid.y[None, :]
    d = (np.angle(np.exp(1j * (X - x0))) ** 2 + (Y - y0) ** 2) / r ** 2
    return np.where(d < 1, (1 - d) ** 3, 0.0)


def _time_profile(grid, phase):
    t = grid.times / grid.t0
    return 1.0 + 0.5 * np.sin(2 * np.pi * t + phase)


def control_field(grid, rng, n_bumps=2, amplitude=1.0):
    """Smooth space-time body force made of seeded bumps, shape (2, M+1, Nx, 2Ny)."""
    c = np.zeros((2, grid.M + 1) + grid.shape)
    for comp in range(2):
        for _ in range(n_bumps):
            x0 = rng.uniform(0, grid.Lx)
            y0 = rng.uniform(-0.5, 0.5)
            r = rng.uniform(0.8, 1.3)
            a = rng.normal()
            prof = _time_profile(grid, rng.uniform(0, 2 * np.pi))
            c[comp] += amplitude * a * prof[:, None, None] * bump_field(grid, x0, y0, r)
    return c


def base_control(grid, kind="flat", amplitude=0.5, h0_amplitude=0.01, seed=0):
    """Small-data base point: zero initial velocity, cosine interface, bump force."""
    rng = np.random.default_rng(seed)
    c = control_field(grid, rng, amplitude=amplitude) if amplitude else None
    h0 = h0_amplitude * np.cos(grid.x)
    return ControlData(np.zeros(grid.shape), np.zeros(grid.shape), h0, c, kind)


def control_direction(grid, rng, kind="flat", scale=1.0):
    """Seeded bump direction in the force, with zero initial-data variation."""
    c = scale * control_field(grid, rng, amplitude=1.0)
    return ControlData(np.zeros(grid.shape), np.zeros(grid.shape), np.zeros(grid.Nx), c, kind)


def random_state(grid, rng, amplitude=1.0, levels=None):
    """Smooth random trajectory for operator checks (no equations imposed)."""
    M = grid.M + 1 if levels is None else levels
    z = FlatState.zeros(grid, M)
    t = np.linspace(0, 1, M)[:, None, None]
    wall = np.cos(0.5 * np.pi * grid.y / grid.Ly)[None, :]
    for arr in (z.v, z.w):
        for _ in range(3):
            k = rng.integers(1, 4)
            ph = rng.uniform(0, 2 * np.pi)
            ylo, yup = rng.normal(size=2)
            # different slopes per side: a kink at the interface
            prof = np.where(np.arange(2 * grid.Ny) < grid.Ny, 1 + ylo * grid.y, 1 + yup * grid.y)
            arr += amplitude * rng.normal() * (1 + t) * (np.cos(k * grid.x + ph)[:, None] * wall * prof)
    # continuity of v, w across the interface row
    for arr in (z.v, z.w):
        arr[..., grid.Ny] = arr[..., grid.Ny - 1]
    for _ in range(2):
        k = rng.integers(1, 4)
        z.p[...] += amplitude * rng.normal() * np.cos(k * grid.x + rng.uniform(0, 6.3))[None, :, None] * (
            1 + 0.3 * grid.ym[None, None, :])
        z.h[...] += 0.2 * amplitude * rng.normal() * (1 + 0.5 * t[..., 0]) * np.cos(k * grid.x + rng.uniform(0, 6.3))
    z.r[:] = amplitude * rng.normal() * np.sin(grid.x)
    return z
