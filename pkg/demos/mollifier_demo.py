"""Mollified interface normal against the exact graph normal.

For h = 0.1 cos x the smoothed normal on the interface is compared with
(-h', 1) for a sequence of kernel widths.  The even kernel gives second
order, so halving eps should cut the error by about four.
"""
import numpy as np

from capflow.geometry import FourierInterpolant
from capflow.grid import GridSpec
from capflow.vof import MollifierSpec, mollified_normal

g = GridSpec(Nx=64)
h = FourierInterpolant(0.1 * np.cos(g.x), g.Lx)
xs = np.linspace(0, g.Lx, 32, endpoint=False)
exact = np.stack([-h(xs, 1), np.ones_like(xs)])

prev = None
for eps in (0.2, 0.1, 0.05, 0.025):
    err = np.max(np.abs(mollified_normal(h, MollifierSpec(eps=eps), xs, h(xs)) - exact))
    ratio = "" if prev is None else f"  ratio {prev / err:.2f}"
    print(f"eps={eps:<6} max error {err:.3e}{ratio}")
    prev = err
