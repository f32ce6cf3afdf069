"""Taylor test of the control-to-state map on a small grid.

Solves the forward problem for a seeded body force, the linearized problem
for one seeded direction, and prints the remainder table.  The remainders
should drop by about a factor 100 per decade of s.
"""
import numpy as np

from capflow.grid import GridSpec
from capflow.scenario import base_control, control_direction
from capflow.state import PhysicalParams
from capflow.studies import taylor_test

grid = GridSpec(Nx=32, Ny=24, dt=0.025, t0=0.5)
params = PhysicalParams(rho1=1.0, rho2=2.0, mu1=1.0, mu2=3.0, sigma=1.5)

ctrl = base_control(grid, "flat", amplitude=0.5, h0_amplitude=0.01, seed=0)
d = control_direction(grid, np.random.default_rng(1))
rep = taylor_test(ctrl, d, grid, params, s_values=(1e-1, 1e-2, 1e-3), physical=True)

print(f"{'s':>8} {'remainder':>12} {'physical':>12}")
for s, r, q in zip(rep.s, rep.remainders, rep.divided):
    print(f"{s:8.0e} {r:12.4e} {q:12.4e}")
print(f"remainder slope {rep.slope:.3f}, physical divided-difference slope {rep.divided_slope:.3f}")
