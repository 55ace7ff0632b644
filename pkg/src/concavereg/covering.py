"""Packings and explicit nets for bounded concave sequences.

Two instruments bracket the covering number ``N(eps)`` of the set of
concave sequences with ``|theta_i| <= B`` (Euclidean norm on R^n):

* a greedy maximal packing over a seeded stream of members, a lower bound
  on packing numbers, hence ``packing(2 eps) <= N(eps)``;
* an explicit net of concave lattice chains whose size is counted exactly
  by dynamic programming, an upper bound on ``N(eps)``.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .cones import ConeKind, ConeSpec, as_sequence, second_differences
from .errors import DomainError, FitError, ResourceError
from .projection import project
from .rng import stream

DEFAULT_BUDGET = 20000
MAX_NET_STATES = 5e8  # (#steps) * n * (#levels) work units for the chain count


@dataclass(frozen=True)
class EntropyEstimate:
    n: int
    B: float
    epsilon: float
    packing_count: int
    net_count: Optional[float] = None
    kind: str = "bounded"

    @property
    def log_packing(self):
        return math.log(self.packing_count)

    @property
    def log_net(self):
        return None if self.net_count is None else math.log(self.net_count)


# -- sampling members -------------------------------------------------------

def extreme_shapes(n, B):
    """Deterministic members of the bounded set: affine ramps, tents, caps, constants."""
    x = np.linspace(-1.0, 1.0, n)
    shapes = [np.zeros(n), np.full(n, B), np.full(n, -B), B * x, -B * x,
              B * (1.0 - 2.0 * x * x), -B * x * x, B * (1.0 - 2.0 * np.abs(x))]
    for c in (0.25, 0.5, 0.75):
        shapes.append(B * np.minimum(1.0, (1.0 - np.abs(x)) / c) * 2.0 - B)
    return [np.clip(s, -B, B) for s in shapes]


def _random_chain(n, B, rng):
    """Minimum of a few random lines, rescaled into a random sub-band of [-B, B]."""
    x = np.linspace(0.0, 1.0, n)
    m = int(rng.integers(1, 6))
    slopes = rng.normal(size=m) * rng.exponential(2.0)
    knots = rng.uniform(0, 1, size=m)
    v = np.min(slopes[:, None] * (x[None, :] - knots[:, None]), axis=0)
    span = np.ptp(v)
    lo, hi = np.sort(rng.uniform(-B, B, size=2))
    if span <= 0:
        return np.full(n, rng.uniform(-B, B))
    return lo + (v - v.min()) * (hi - lo) / span


def sample_bounded_concave(n, B, rng):
    """One random member of the bounded concave set.

    Half the draws are exact projections of scaled Gaussian vectors onto the
    bounded set, half are rescaled minima of random lines.
    """
    if rng.random() < 0.5:
        scale = B * math.exp(rng.uniform(math.log(0.05), math.log(3.0)))
        y = scale * rng.standard_normal(n)
        return project(y, ConeSpec.bounded_concave(B)).point
    return _random_chain(n, B, rng)


def _sample_block(m, B, rng):
    if m == 0:
        return np.zeros(0)
    if m < 3:
        return rng.uniform(-B, B, size=m)
    return sample_bounded_concave(m, B, rng)


def sample_three_block(n, B, rng):
    """Random member of the bounded three-block set, breakpoints drawn uniformly."""
    m1, m2 = np.sort(rng.choice(n + 2, size=2, replace=False))
    m1, m2 = int(m1), int(m2)
    parts = [_sample_block(m1, B, rng), _sample_block(m2 - 1 - m1, B, rng),
             _sample_block(n + 1 - m2, B, rng)]
    return np.concatenate(parts)


def proposals(n, B, budget, seed, cone=None):
    """Fixed-order proposal stream: extreme shapes first, then seeded samples."""
    kind = _kind(cone)
    if kind is ConeKind.THREE_BLOCK:
        draw = sample_three_block
    else:
        draw = sample_bounded_concave
    rng = stream(seed, n, 0 if kind is ConeKind.BOUNDED_CONCAVE else 1)
    out = extreme_shapes(n, B)[:budget]
    while len(out) < budget:
        out.append(draw(n, B, rng))
    return np.array(out)


def _kind(cone):
    if cone is None:
        return ConeKind.BOUNDED_CONCAVE
    if cone.kind not in (ConeKind.BOUNDED_CONCAVE, ConeKind.THREE_BLOCK):
        raise DomainError("packings are built for the bounded concave or three-block sets")
    return cone.kind


# -- greedy packing ---------------------------------------------------------

def _check_inputs(n, B, epsilon):
    if n < 3:
        raise DomainError("need n >= 3")
    if not B > 0 or not epsilon > 0:
        raise DomainError("B and epsilon must be positive")


def greedy_pack(points, epsilon, start=None):
    """Indices of a greedy epsilon-separated subset of ``points`` (rows), in order.

    ``start`` seeds the packing with already accepted indices; they must be
    pairwise more than epsilon apart.
    """
    accepted = list(start or [])
    buf = np.empty((len(points), points.shape[1]))
    sq = np.empty(len(points))
    count = len(accepted)
    buf[:count] = points[accepted]
    sq[:count] = np.einsum("ij,ij->i", buf[:count], buf[:count])
    eps2 = epsilon * epsilon
    taken = set(accepted)
    for i in range(len(points)):
        if i in taken:
            continue
        p = points[i]
        pp = float(p @ p)
        if count:
            d2 = sq[:count] - 2.0 * (buf[:count] @ p) + pp
            if d2.min() <= eps2:
                continue
        buf[count] = p
        sq[count] = pp
        count += 1
        accepted.append(i)
    return accepted


def greedy_packing(n, B, epsilon, cone=None, budget=DEFAULT_BUDGET, seed=0):
    """Greedy maximal epsilon-packing over ``budget`` seeded proposals.

    Parameters
    ----------
    n : int
        Sequence length (at least 3).
    B : float
        Entry bound.
    epsilon : float
        Separation radius; distances are Euclidean on R^n.
    cone : ConeSpec, optional
        Bounded concave (default) or a three-block spec; only the kind is
        used, the bound is ``B``.
    budget : int
        Number of proposals examined.
    seed : int

    Returns
    -------
    EntropyEstimate
        ``packing_count`` is the size of the packing; ``net_count`` is left
        empty.
    """
    _check_inputs(n, B, epsilon)
    pts = proposals(n, B, budget, seed, cone)
    kind = _kind(cone)
    return EntropyEstimate(int(n), float(B), float(epsilon), len(greedy_pack(pts, epsilon)),
                           kind=kind.value)


def nested_packings(n, B, eps_grid, cone=None, budget=DEFAULT_BUDGET, seed=0):
    """Packings for a grid of radii, each extending the one at the next larger radius.

    The counts are non-increasing in epsilon by construction.
    """
    _check_inputs(n, B, min(eps_grid))
    pts = proposals(n, B, budget, seed, cone)
    kind = _kind(cone).value
    acc = []
    out = {}
    for eps in sorted(eps_grid, reverse=True):
        acc = greedy_pack(pts, eps, start=acc)
        out[float(eps)] = EntropyEstimate(int(n), float(B), float(eps), len(acc), kind=kind)
    return [out[float(e)] for e in eps_grid]


# -- explicit net -----------------------------------------------------------

def _lattice(n, B, epsilon):
    h = epsilon / math.sqrt(n)
    levels = int(math.floor(2.0 * B / h + 1e-12)) + 1
    return h, levels


def net_point(theta, B, epsilon):
    """The net member assigned to ``theta``: the least concave majorant of its
    lattice rounding.

    The rounding ``r`` lies below ``theta`` by less than ``h = eps/sqrt(n)``
    per entry; the majorant lies between ``r`` and ``theta``, so it is
    within ``eps`` of ``theta``, concave, and bounded by B.
    """
    theta = as_sequence(theta)
    n = theta.size
    h, levels = _lattice(n, B, epsilon)
    idx = np.clip(np.floor((theta + B) / h), 0, levels - 1)
    r = -B + h * idx
    return concave_majorant(r)


def concave_majorant(v):
    """Least concave majorant of a sequence (upper hull of its graph)."""
    v = as_sequence(v)
    hull = []
    for i, y in enumerate(v):
        while len(hull) >= 2:
            (i0, y0), (i1, y1) = hull[-2], hull[-1]
            if (y1 - y0) * (i - i0) <= (y - y0) * (i1 - i0):
                hull.pop()
            else:
                break
        hull.append((i, y))
    xs, ys = zip(*hull)
    return np.interp(np.arange(v.size), xs, ys)


def interpolation_net(n, B, epsilon, max_work=MAX_NET_STATES):
    """Size of the explicit lattice-chain epsilon-net.

    Net members are concave piecewise-linear sequences whose vertices lie on
    the lattice ``{1..n} x {-B + m h}`` with ``h = eps / sqrt(n)``.  Their
    number is counted exactly (as a float) by a dynamic program over edge
    slopes taken in decreasing order.  When ``eps >= B sqrt(n)`` the zero
    sequence alone is a net.
    """
    _check_inputs(n, B, epsilon)
    if epsilon >= B * math.sqrt(n):
        return 1.0
    h, levels = _lattice(n, B, epsilon)
    work = (n - 1) * (2 * levels - 1) * n * levels
    if work > max_work:
        raise ResourceError(f"lattice of {levels} levels at n={n} exceeds the work budget")
    classes = {}
    for dx in range(1, n):
        for dv in range(-(levels - 1), levels):
            classes.setdefault(Fraction(dv, dx), []).append((dx, dv))
    count = np.zeros((n, levels))
    count[0, :] = 1.0  # chains start at the first index, any level
    for slope in sorted(classes, reverse=True):
        before = count.copy()
        for dx, dv in classes[slope]:
            src_lo, src_hi = max(0, -dv), min(levels, levels - dv)
            count[dx:, src_lo + dv:src_hi + dv] += before[:n - dx, src_lo:src_hi]
    return float(count[n - 1].sum())


# -- fitting ----------------------------------------------------------------

def _fixed_effect_slope(groups):
    """Common slope of y on x with a separate intercept per group."""
    sxx = sxy = 0.0
    used = 0
    for xs, ys in groups:
        if len(xs) < 2:
            continue
        xs, ys = np.asarray(xs), np.asarray(ys)
        xc = xs - xs.mean()
        sxx += float(xc @ xc)
        sxy += float(xc @ (ys - ys.mean()))
        used += len(xs)
    if used < 4 or sxx <= 0:
        return None
    return sxy / sxx


def fit_entropy_exponents(estimates):
    """Slopes of ``log(log packing_count)`` against ``log(1/eps)`` and ``log n``.

    The epsilon slope pools runs at equal n (one intercept per n); the n
    slope pools runs at equal epsilon.  A slope is None when fewer than four
    usable points vary that variable; FitError if neither can be fitted.
    Counts of 1 carry no information on the log-log scale and are skipped.
    """
    pts = [e for e in estimates if e.packing_count >= 2]
    by_n, by_eps = {}, {}
    for e in pts:
        y = math.log(math.log(e.packing_count))
        by_n.setdefault(e.n, ([], []))
        by_n[e.n][0].append(math.log(1.0 / e.epsilon))
        by_n[e.n][1].append(y)
        by_eps.setdefault(e.epsilon, ([], []))
        by_eps[e.epsilon][0].append(math.log(e.n))
        by_eps[e.epsilon][1].append(y)
    eps_slope = _fixed_effect_slope(by_n.values())
    n_slope = _fixed_effect_slope(by_eps.values())
    if eps_slope is None and n_slope is None:
        raise FitError("need at least four points varying epsilon or n")
    return eps_slope, n_slope


def is_concave_bounded(theta, B, tol=1e-9):
    theta = as_sequence(theta)
    return bool(np.all(np.abs(theta) <= B + tol) and np.all(second_differences(theta) <= tol))
