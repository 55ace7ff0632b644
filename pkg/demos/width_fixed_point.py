"""Localized Gaussian width around a concave center and its critical radius.

For each radius t we average, over common Gaussian draws, the largest
inner product with a cone member at distance at most t from the center.
The curve is non-decreasing and t -> width/t is non-increasing.  The
critical radius is where the curve crosses t^2/2; its square, divided by
n, tracks the estimation risk.
"""

import numpy as np

from concavereg import width
from concavereg.risk import SignalSpec

n, sigma = 128, 1.0
center = SignalSpec("quadratic", n, scale=4.0).sequence()
grid = width.geometric_grid(0.1, 40.0, per_decade=4)
curve = width.estimate_width(center, sigma=sigma, t_grid=grid, reps=60, seed=7, fixed_point=True)

print(f"{'t':>9} {'width':>10} {'width/t':>9} {'t^2/2':>9}")
for t, m in zip(curve.t_grid, curve.mean):
    print(f"{t:>9.3f} {m:>10.4f} {m / t:>9.4f} {t * t / 2:>9.3f}")
s = curve.fixed_point
print(f"\ncritical radius s = {s:.3f}, s^2/n = {s * s / n:.4f}")
assert np.all(np.diff(curve.mean) >= -1e-9)
