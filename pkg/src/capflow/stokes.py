"""Linear two-phase Stokes problem with a free interface at y = 0.

Fourier in x, second-order finite differences in y, implicit Euler in time.
Per wavenumber the unknowns are, for each half-strip, the nodal velocities
(v, w) and the midpoint pressure p, plus the interface height h:

    [v_lo, w_lo, p_lo, v_up, w_up, p_up, h]      (6*Ny - 1 unknowns)

The rows are the momentum equations at interior nodes, no-slip at the walls,
continuity at midpoints, the interface conditions

    -[mu dy v] - [mu dx w] = g_v,   -2[mu dy w] + [pi] - sigma h'' = g_w,
    [v] = [w] = 0,                  h^{m+1} - dt w(0) = h^m + dt g_h^m,

and, for k = 0, the gauge p_lo(-Ly) + p_up(Ly) = 0 in place of the upper-wall
w row (the k=0 flux of w is fixed by continuity).  All modes are stacked in
one block-diagonal sparse matrix that is factorized once per (grid, params).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import avg_midpoints, ddx, ddy, dy_midpoints, one_sided_traces, pressure_nodes, trace_jump
from .rhs import assemble_N, check_compatibility, jump_pressure_r0
from .state import FlatState, RhsTuple
from .transform import extend_half_fields

log = logging.getLogger(__name__)


class CompatibilityWarning(UserWarning):
    pass


class SingularModeError(RuntimeError):
    pass


@dataclass(frozen=True)
class _Layout:
    Ny: int

    @property
    def n(self):
        return 6 * self.Ny - 1

    def vl(self, j=0):
        return j

    def wl(self, j=0):
        return self.Ny + j

    def pl(self, j=0):
        return 2 * self.Ny + j

    def vu(self, j=0):
        return 3 * self.Ny - 1 + j

    def wu(self, j=0):
        return 4 * self.Ny - 1 + j

    def pu(self, j=0):
        return 5 * self.Ny - 1 + j

    @property
    def h(self):
        return 6 * self.Ny - 2


def _mode_parts(grid, params, with_mass):
    """Sparse pieces with A_k = B0 + k^2 B2 + i k B1 (+ k=0 variant).

    With ``with_mass`` the rho/dt diagonal and the h-row identity are moved
    out of B0 into a separate mass matrix (semi-discrete form).
    """
    L = _Layout(grid.Ny)
    Ny, n = grid.Ny, L.n
    B0, B1, B2 = (sp.lil_matrix((n, n)) for _ in range(3))
    Mm = sp.lil_matrix((n, n))
    dt = grid.dt
    Pint = grid.pressure_interp.toarray()
    Pdy = grid.pressure_dy.toarray()
    sides = (
        ("lo", params.rho1, params.mu1, L.vl, L.wl, L.pl, grid.D2_lower.toarray(),
         Pint[:Ny, : Ny - 1], Pdy[:Ny, : Ny - 1], np.diff(grid.y_lower)),
        ("up", params.rho2, params.mu2, L.vu, L.wu, L.pu, grid.D2_upper.toarray(),
         Pint[Ny:, Ny - 1:], Pdy[Ny:, Ny - 1:], np.diff(grid.y_upper)),
    )
    for _, rho, mu, iv, iw, ip, D2, Pi, Pd, dy in sides:
        for j in range(1, Ny - 1):
            for row, col0 in ((iv(j), iv(0)), (iw(j), iw(0))):
                if with_mass:
                    Mm[row, row] = rho
                else:
                    B0[row, row] += rho / dt
                B2[row, row] += mu
                for c in np.nonzero(D2[j])[0]:
                    B0[row, col0 + c] += -mu * D2[j, c]
            for c in np.nonzero(Pi[j])[0]:
                B1[iv(j), ip(c)] += Pi[j, c]
            for c in np.nonzero(Pd[j])[0]:
                B0[iw(j), ip(c)] += Pd[j, c]
        for j in range(Ny - 1):
            B1[ip(j), iv(j)] += 0.5
            B1[ip(j), iv(j + 1)] += 0.5
            B0[ip(j), iw(j)] += -1.0 / dy[j]
            B0[ip(j), iw(j + 1)] += 1.0 / dy[j]
    # walls
    B0[L.vl(0), L.vl(0)] = 1.0
    B0[L.wl(0), L.wl(0)] = 1.0
    B0[L.vu(Ny - 1), L.vu(Ny - 1)] = 1.0
    B0[L.wu(Ny - 1), L.wu(Ny - 1)] = 1.0
    # continuity of velocity
    B0[L.vl(Ny - 1), L.vu(0)] = 1.0
    B0[L.vl(Ny - 1), L.vl(Ny - 1)] = -1.0
    B0[L.wl(Ny - 1), L.wu(0)] = 1.0
    B0[L.wl(Ny - 1), L.wl(Ny - 1)] = -1.0
    # tangential stress
    D1l = grid.D1_lower.toarray()[Ny - 1]
    D1u = grid.D1_upper.toarray()[0]
    mu1, mu2 = params.mu1, params.mu2
    for c in np.nonzero(D1u)[0]:
        B0[L.vu(0), L.vu(c)] += -mu2 * D1u[c]
        B0[L.wu(0), L.wu(c)] += -2 * mu2 * D1u[c]
    for c in np.nonzero(D1l)[0]:
        B0[L.vu(0), L.vl(c)] += mu1 * D1l[c]
        B0[L.wu(0), L.wl(c)] += 2 * mu1 * D1l[c]
    B1[L.vu(0), L.wu(0)] += -mu2
    B1[L.vu(0), L.wl(Ny - 1)] += mu1
    # normal stress with extrapolated interface pressures
    wlo, wup = grid.interface_pressure_weights
    B0[L.wu(0), L.pu(0)] += wup[0]
    B0[L.wu(0), L.pu(1)] += wup[1]
    B0[L.wu(0), L.pl(Ny - 3)] += -wlo[0]
    B0[L.wu(0), L.pl(Ny - 2)] += -wlo[1]
    B2[L.wu(0), L.h] += params.sigma
    # kinematic row
    if with_mass:
        Mm[L.h, L.h] = 1.0
    else:
        B0[L.h, L.h] = 1.0
    B0[L.h, L.wu(0)] = -dt if not with_mass else -1.0
    B0z = B0.copy()
    B0z[L.wu(Ny - 1), L.wu(Ny - 1)] = 0.0
    B0z[L.wu(Ny - 1), L.pl(0)] = 1.0
    B0z[L.wu(Ny - 1), L.pu(Ny - 2)] = 1.0
    return [m.tocsr() for m in (B0, B0z, B1, B2, Mm)]


def mode_matrix(grid, params, kidx, semi_discrete=False):
    """Per-mode matrix (and mass matrix when ``semi_discrete``)."""
    B0, B0z, B1, B2, Mm = _mode_parts(grid, params, semi_discrete)
    k = grid.k[kidx]
    A = (B0z if kidx == 0 else B0) + k * k * B2 + 1j * k * B1
    if semi_discrete:
        return A.tocsc(), Mm.tocsc()
    return A.tocsc()


class StokesOperator:
    """Factorized block-diagonal system for one (grid, params) pair."""

    def __init__(self, grid, params):
        self.grid, self.params = grid, params
        self.layout = _Layout(grid.Ny)
        n = self.layout.n
        B0, B0z, B1, B2, _ = _mode_parts(grid, params, False)
        nyq = grid.Nx // 2
        blocks = []
        for i, k in enumerate(grid.k):
            if i == nyq:
                blocks.append(sp.identity(n, format="csr", dtype=complex))
            else:
                blocks.append((B0z if i == 0 else B0) + k * k * B2 + 1j * k * B1)
        self.nmodes = len(grid.k)
        self.matrix = sp.block_diag(blocks, format="csc")
        try:
            self.lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise SingularModeError(self._find_singular(blocks)) from exc
        self._rho = params.rho_nodes(grid)

    @staticmethod
    def _find_singular(blocks):
        for i, b in enumerate(blocks):
            try:
                spla.splu(sp.csc_matrix(b))
            except RuntimeError:
                return f"singular Stokes system for wavenumber index {i}"
        return "singular Stokes system"

    def step(self, vm, wm, hm, fv, fw, fd, gv, gw, ghm):
        """One implicit Euler step; arguments are physical-space arrays."""
        g, L = self.grid, self.layout
        Ny, nyq = g.Ny, g.Nx // 2
        rho = self._rho
        F = lambda a: np.fft.rfft(a, axis=0)
        bv = F(fv + rho * vm / g.dt)
        bw = F(fw + rho * wm / g.dt)
        bd = F(fd)
        R = np.zeros((self.nmodes, L.n), dtype=complex)
        R[:, L.vl(1):L.vl(Ny - 1)] = bv[:, 1:Ny - 1]
        R[:, L.wl(1):L.wl(Ny - 1)] = bw[:, 1:Ny - 1]
        R[:, L.vu(1):L.vu(Ny - 1)] = bv[:, Ny + 1:2 * Ny - 1]
        R[:, L.wu(1):L.wu(Ny - 1)] = bw[:, Ny + 1:2 * Ny - 1]
        R[:, L.pl(0):L.pl(Ny - 1)] = bd[:, : Ny - 1]
        R[:, L.pu(0):L.pu(Ny - 1)] = bd[:, Ny - 1:]
        R[:, L.vu(0)] = F(gv)
        R[:, L.wu(0)] = F(gw)
        R[:, L.h] = F(hm + g.dt * ghm)
        R[nyq] = 0.0
        X = self.lu.solve(R.ravel()).reshape(self.nmodes, L.n)
        X[nyq] = 0.0
        inv = lambda a: np.fft.irfft(a, n=g.Nx, axis=0)
        v = inv(np.concatenate([X[:, L.vl(0):L.vl(Ny)], X[:, L.vu(0):L.vu(Ny)]], axis=1))
        w = inv(np.concatenate([X[:, L.wl(0):L.wl(Ny)], X[:, L.wu(0):L.wu(Ny)]], axis=1))
        p = inv(np.concatenate([X[:, L.pl(0):L.pl(Ny - 1)], X[:, L.pu(0):L.pu(Ny - 1)]], axis=1))
        h = inv(X[:, L.h])
        return v, w, p, h


@lru_cache(maxsize=16)
def stokes_operator(grid, params):
    return StokesOperator(grid, params)


def initial_data_residuals(rhs, v0, w0, grid, params):
    """Relative residuals of div u0 = f_d(0) and the tangential row at t=0."""
    div = ddx(avg_midpoints(v0, grid), grid, 1, axis=-2) + dy_midpoints(w0, grid) - rhs.fd[0]
    jdyv = _jump(ddy(v0, grid), grid, params)
    jdxw = _jump(ddx(w0, grid, 1, axis=-2), grid, params)
    tang = -jdyv - jdxw - rhs.gv[0]
    scale = max(1e-300, float(np.max(np.abs(v0))), float(np.max(np.abs(w0))), rhs.max_abs())
    return float(np.max(np.abs(div))) / scale, float(np.max(np.abs(tang))) / scale


def _jump(a, grid, params):
    lo, up = one_sided_traces(a, grid)
    return params.mu2 * up - params.mu1 * lo


def stokes_solve(rhs, v0, w0, h0, grid, params, check_compat=True, compat_tol=1e-6):
    """March the linear free-boundary Stokes system over all time levels.

    ``rhs`` is a :class:`RhsTuple` trajectory; level m+1 data drive step
    m -> m+1 except ``g_h``, which enters at level m.  Level 0 of the returned
    pressure copies level 1 and ``r[0]`` is the jump pressure of the initial
    data.
    """
    M = grid.M
    if rhs.fv.shape[0] != M + 1:
        raise ValueError(f"rhs has {rhs.fv.shape[0]} levels, expected {M + 1}")
    if not rhs.is_finite():
        raise FloatingPointError("non-finite right-hand side")
    if check_compat:
        rd, rt = initial_data_residuals(rhs, v0, w0, grid, params)
        if max(rd, rt) > compat_tol:
            warnings.warn(f"initial compatibility residuals div={rd:.2e} tangential={rt:.2e}",
                          CompatibilityWarning, stacklevel=2)
    op = stokes_operator(grid, params)
    z = FlatState.zeros(grid, M + 1)
    z.v[0], z.w[0], z.h[0] = v0, w0, h0
    for m in range(M):
        v, w, p, h = op.step(z.v[m], z.w[m], z.h[m], rhs.fv[m + 1], rhs.fw[m + 1], rhs.fd[m + 1],
                             rhs.gv[m + 1], rhs.gw[m + 1], rhs.gh[m])
        z.v[m + 1], z.w[m + 1], z.p[m + 1], z.h[m + 1] = v, w, p, h
    z.p[0] = z.p[min(1, M)]
    z.r[:] = trace_jump(pressure_nodes(z.p, grid), grid)[1]
    z.r[0] = jump_pressure_r0(v0, w0, h0, params, grid)
    if not z.is_finite():
        raise FloatingPointError("non-finite values in Stokes solution")
    return z


def apply_stokes_operator(z, grid, params):
    """Discrete operator L applied to a trajectory: the data that reproduce z.

    Consistent with :func:`stokes_solve` whenever z satisfies the wall,
    continuity and gauge conditions and has no Nyquist content.
    """
    rho = params.rho_nodes(grid)
    mu = params.mu_nodes(grid)
    dt = grid.dt
    dtv = np.zeros_like(z.v)
    dtw = np.zeros_like(z.w)
    dtv[1:] = (z.v[1:] - z.v[:-1]) / dt
    dtw[1:] = (z.w[1:] - z.w[:-1]) / dt
    pn = pressure_nodes(z.p, grid)
    from .grid import pressure_dy
    fv = rho * dtv - mu * (ddx(z.v, grid, 2, axis=-2) + ddy(z.v, grid, 2)) + ddx(pn, grid, 1, axis=-2)
    fw = rho * dtw - mu * (ddx(z.w, grid, 2, axis=-2) + ddy(z.w, grid, 2)) + pressure_dy(z.p, grid)
    fd = ddx(avg_midpoints(z.v, grid), grid, 1, axis=-2) + dy_midpoints(z.w, grid)
    gv = -_jump(ddy(z.v, grid), grid, params) - _jump(ddx(z.w, grid, 1, axis=-2), grid, params)
    r = trace_jump(pn, grid)[1]
    gw = -2 * _jump(ddy(z.w, grid), grid, params) + r - params.sigma * ddx(z.h, grid, 2)
    gh = np.zeros_like(z.h)
    gh[:-1] = (z.h[1:] - z.h[:-1]) / dt - one_sided_traces(z.w, grid)[1][1:]
    return RhsTuple(fv=fv, fw=fw, fd=fd, gv=gv, gw=gw, gh=gh)


def interface_residuals(z, rhs, grid, params):
    """Relative residuals of the imposed interface rows at every level >= 1.

    Returns a dict of arrays (one value per time level) for ``gv``, ``gw``
    and ``jump`` (velocity continuity).
    """
    L = apply_stokes_operator(z, grid, params)
    out = {}
    for key in ("gv", "gw"):
        a = getattr(L, key)[1:]
        b = getattr(rhs, key)[1:]
        scale = np.maximum(np.max(np.abs(b), axis=-1), 1e-300)
        scale = np.maximum(scale, np.max(np.abs(a), axis=-1))
        out[key] = np.max(np.abs(a - b), axis=-1) / scale
    jv = trace_jump(z.v, grid)[1][1:]
    jw = trace_jump(z.w, grid)[1][1:]
    vs = np.maximum(np.max(np.abs(z.v[1:]), axis=(-1, -2)), np.max(np.abs(z.w[1:]), axis=(-1, -2)))
    out["jump"] = np.maximum(np.max(np.abs(jv), axis=-1), np.max(np.abs(jw), axis=-1)) / np.maximum(vs, 1e-300)
    return out


def heat_smooth(g0, t, grid):
    """Apply exp(-k^2 t) per Fourier mode; ``t`` may be a vector of times."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("heat_smooth needs t >= 0")
    gh = np.fft.rfft(np.asarray(g0, dtype=float), axis=-1)
    mult = np.exp(-np.multiply.outer(t, grid.k ** 2))
    return np.fft.irfft(gh * mult, n=grid.Nx, axis=-1)


def _heat_y_propagator(grid):
    """Eigen-decomposition of the Dirichlet FD Laplacian on the full column."""
    yy = np.concatenate([grid.y_lower[:-1], grid.y_upper])
    n = len(yy)
    D2 = np.zeros((n - 2, n - 2))
    for j in range(1, n - 1):
        hm, hp = yy[j] - yy[j - 1], yy[j + 1] - yy[j]
        a, c = 2 / (hm * (hm + hp)), 2 / (hp * (hm + hp))
        D2[j - 1, j - 1] = -(a + c)
        if j > 1:
            D2[j - 1, j - 2] = a
        if j < n - 2:
            D2[j - 1, j] = c
    lam, V = sla.eig(D2)
    return lam.real, V.real, np.linalg.inv(V.real)


def two_sided_heat(q0, times, grid):
    """c_d(t) = R_pm exp(t Laplacian) E_pm q0 for each half-strip.

    Each side of ``q0`` is extended to the whole strip, evolved by the heat
    semigroup (spectral in x, Dirichlet FD in y) and restricted back.
    """
    Ny = grid.Ny
    lam, V, Vi = _heat_y_propagator(grid)
    qm, qp = extend_half_fields(q0, grid)
    out = np.zeros((len(times),) + grid.shape)
    for q, sl in ((qm, slice(0, Ny)), (qp, slice(Ny, 2 * Ny))):
        col = np.concatenate([q[:, : Ny - 1], q[:, Ny:]], axis=1)
        qh = np.fft.rfft(col[:, 1:-1], axis=0)
        modal = qh @ Vi.T
        for m, t in enumerate(times):
            evo = (modal * np.exp(-np.multiply.outer(grid.k ** 2 * t, np.ones_like(lam)) + lam * t)) @ V.T
            full = np.zeros((grid.Nx, 2 * Ny - 1))
            full[:, 1:-1] = np.fft.irfft(evo, n=grid.Nx, axis=0)
            both = np.concatenate([full[:, :Ny], full[:, Ny - 1:]], axis=1)
            out[m][:, sl] = both[:, sl]
    out[0] = q0
    return out


def construct_zstar(v0, w0, h0, grid, params, tol=1e-6):
    """Compatibility-resolving reference solution z* and its data R*.

    Raises ValueError if the initial data fail the compatibility check.
    """
    rep = check_compatibility(v0, w0, h0, params, grid, tol=tol)
    if not rep.passed:
        raise ValueError(f"incompatible initial data (relative residual {rep.relative:.3e})")
    times = grid.times
    r0 = jump_pressure_r0(v0, w0, h0, params, grid)
    z0 = FlatState(v=v0, w=w0, p=np.zeros(grid.pshape), r=r0, h=h0)
    N0 = assemble_N(z0, params, grid)
    gv = heat_smooth(N0.gv, times, grid)
    gw = heat_smooth(N0.gw, times, grid)
    gh = heat_smooth(N0.gh, times, grid)
    hx = ddx(h0, grid, 1)[:, None]
    cd = two_sided_heat(v0 * hx, times, grid)
    fd = dy_midpoints(cd, grid)
    zeros = np.zeros((len(times),) + grid.shape)
    R = RhsTuple(fv=zeros, fw=zeros.copy(), fd=fd, gv=gv, gw=gw, gh=gh)
    z = stokes_solve(R, v0, w0, h0, grid, params)
    return z, R


def capillary_decay_rate(grid, params, kidx=1):
    """Slowest semi-discrete decay rate of mode ``kidx`` (generalized eig)."""
    A, Mm = mode_matrix(grid, params, kidx, semi_discrete=True)
    lam = sla.eig(A.toarray(), Mm.toarray(), right=False)
    lam = lam[np.isfinite(lam)]
    lam = lam[np.abs(lam) < 1e12]
    return float(np.min(lam.real[lam.real > 1e-12]))
