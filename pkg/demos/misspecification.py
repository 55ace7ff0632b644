"""What the estimator converges to when the truth is not concave.

The estimate then tracks the closest concave sequence to the truth.  The
squared distance to the truth splits into a fixed offset (the
approximation error) plus a regret term that still shrinks with n.  For a
convex truth the closest concave sequence is a straight line, so the
regret shrinks at a nearly parametric rate.
"""

from concavereg import risk
from concavereg.risk import SignalSpec

NS = [64, 128, 256, 512]
for family in ("convex", "quadratic"):
    reports = risk.run_grid(SignalSpec(family, NS[0]), NS, reps=100, seed=99, regret=True)
    print(f"{family} truth")
    print(f"  {'n':>5} {'offset/n':>10} {'regret':>10} {'stderr':>9}")
    for rep in reports:
        print(f"  {rep.n:>5} {rep.offset:>10.5f} {rep.regret_mean:>10.5f} {rep.regret_stderr:>9.5f}")
    print(f"  regret slope {risk.fit_rate(reports, regret=True).slope:.3f}\n")
