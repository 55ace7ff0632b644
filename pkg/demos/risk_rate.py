"""How fast does the concave least-squares estimate approach a smooth truth?

A strictly concave signal has curvature everywhere, so the estimator must
spend effort on every stretch of the curve.  The mean squared error then
falls roughly like n^(-4/5), slower than the n^(-1) of a parametric fit.
An affine signal sits on a single face of the cone and the error decays
almost like n^(-1), up to a logarithm.
"""

from concavereg import risk
from concavereg.risk import SignalSpec

NS = [64, 128, 256, 512, 1024]

for family, extra in (("quadratic", {}), ("affine", {"b": 1.0})):
    reports = risk.run_grid(SignalSpec(family, NS[0], **extra), NS, reps=100, seed=2024)
    print(f"{family} truth")
    print(f"  {'n':>6} {'mean loss':>12} {'stderr':>10}")
    for rep in reports:
        print(f"  {rep.n:>6} {rep.mean_loss:>12.5f} {rep.stderr:>10.5f}")
    fit = risk.fit_rate(reports)
    print(f"  fitted log-log slope {fit.slope:.3f} (r2 {fit.r2:.3f})\n")
