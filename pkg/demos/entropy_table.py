"""Metric entropy of bounded concave sequences, bracketed from both sides.

A greedy packing over random members gives a lower estimate of the number
of radius-eps balls needed; an explicit lattice net gives an upper count.
The log counts grow like a small power of 1/eps, far below the n*log(1/eps)
of an unconstrained box.
"""

import math

from concavereg import covering

B = 1.0
print(f"{'n':>4} {'eps/sqrt(n)':>12} {'log pack':>9} {'log net':>9}")
estimates = []
for n in (8, 16, 32):
    for rel in (0.05, 0.1, 0.2, 0.4):
        eps = rel * B * math.sqrt(n)
        pack = covering.greedy_packing(n, B, eps, budget=4000, seed=3).packing_count
        net = covering.interpolation_net(n, B, eps / 2)
        estimates.append(covering.EntropyEstimate(n, B, eps, pack))
        print(f"{n:>4} {rel:>12.2f} {math.log(pack):>9.3f} {math.log(net):>9.3f}")

eps_slope, n_slope = covering.fit_entropy_exponents(estimates)
print(f"\nlog packing ~ eps^-{eps_slope:.2f} (fixed n), n^{n_slope:.2f} (fixed eps/sqrt(n))")
