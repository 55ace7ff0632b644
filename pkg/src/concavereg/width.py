"""Monte-Carlo localized Gaussian widths and the bound formulas they are checked against.

The localized width of a center ``c`` over a cone is

    f_c(t) = E sup { <z, theta - c> : theta in cone, |theta - c| <= t },

with ``z ~ N(0, sigma^2 I)``.  Estimates use common random numbers: every
radius in a grid sees the same noise draws, which makes the estimated curve
exactly non-decreasing and star-shaped (``f(t)/t`` non-increasing) in every
replication.
"""

import math
import warnings
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import numpy as np

from .cones import ConeSpec, as_sequence, is_member, is_monotone_concave
from .errors import DomainError, NoCrossingError
from .projection import BallPath
from .rng import gaussian, mean_stderr, run_replications, stream

DEFAULT_REPS = 400


def geometric_grid(lo, hi, per_decade=16):
    """Geometric grid from lo to hi (inclusive) with ``per_decade`` points per decade."""
    if not 0 < lo < hi:
        raise DomainError("geometric grid needs 0 < lo < hi")
    count = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, count)


@dataclass(frozen=True)
class WidthCurve:
    center: np.ndarray
    sigma: float
    t_grid: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    reps: int
    seed: int
    fixed_point: Optional[float] = None
    samples: Optional[np.ndarray] = field(default=None, repr=False)  # reps x len(t_grid)

    @property
    def estimates(self):
        return list(zip(self.mean.tolist(), self.stderr.tolist()))


def _check_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("t_grid must be a non-empty 1-d sequence")
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise DomainError("t_grid must be non-negative and strictly increasing")
    return t


def _rep_sups(rep, center, cone, sigma, t_grid, seed, tol):
    z = gaussian(seed, rep, center.size, sigma)
    path = BallPath(z, center, cone)
    return np.array([path.solve(t, tol=tol).value for t in t_grid])


def width_samples(center, cone, sigma, t_grid, reps, seed, tol=1e-6, workers=1):
    """Per-replication suprema, shape ``(reps, len(t_grid))``, with common noise.

    No precondition on the center: radii below its distance to the cone give
    ``-inf``.
    """
    center = as_sequence(center)
    t_grid = _check_grid(t_grid)
    if reps < 1:
        raise DomainError("reps must be positive")
    fn = partial(_rep_sups, center=center, cone=cone or ConeSpec.full_concave(),
                 sigma=float(sigma), t_grid=t_grid, seed=seed, tol=tol)
    return np.array(run_replications(fn, reps, workers)).reshape(reps, t_grid.size)


def estimate_width(center, cone=None, sigma=1.0, t_grid=None, reps=DEFAULT_REPS, seed=None,
                   tol=1e-6, fixed_point=False, workers=1):
    """Monte-Carlo estimate of the localized width on a grid of radii.

    Parameters
    ----------
    center : array_like
        Center of the ball; must belong to ``cone``.
    cone : ConeSpec, optional
        Defaults to the full concave cone.
    sigma : float
        Noise standard deviation.
    t_grid : array_like, optional
        Increasing non-negative radii; defaults to a 16-per-decade geometric
        grid over ``[0.1 sigma, 10 sigma sqrt(n)]``.
    reps, seed : int
        Replications and base seed; replication r uses stream ``(seed, r)``.
    fixed_point : bool
        Also locate the radius where the mean curve meets ``t^2/2``.

    Returns
    -------
    WidthCurve
        Means, standard errors and the per-replication suprema.
    """
    cone = cone or ConeSpec.full_concave()
    center = as_sequence(center)
    if reps < 1:
        raise DomainError("reps must be positive")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if not is_member(center, cone, tol=1e-9 * max(1.0, float(np.max(np.abs(center))))):
        raise DomainError("center must belong to the cone")
    n = center.size
    if t_grid is None:
        t_grid = geometric_grid(0.1 * sigma, 10.0 * sigma * math.sqrt(n))
    t_grid = _check_grid(t_grid)
    samples = width_samples(center, cone, sigma, t_grid, reps, seed, tol=tol, workers=workers)
    mean, se = mean_stderr(samples)
    s = None
    if fixed_point:
        wf = WidthFunction(center, cone, sigma, reps, seed, tol=tol, workers=workers)
        s = find_fixed_point(wf, sigma=sigma)
    return WidthCurve(center, float(sigma), t_grid, mean, se, int(reps), int(seed),
                      fixed_point=s, samples=samples)


class WidthFunction:
    """Callable ``t -> mean supremum`` over a fixed set of noise draws.

    Calls at different radii share the same ``z`` per replication, so the
    function is exactly non-decreasing and star-shaped.  Each replication
    keeps its last working set to warm-start the next evaluation.
    """

    def __init__(self, center, cone=None, sigma=1.0, reps=DEFAULT_REPS, seed=None,
                 tol=1e-6, workers=1):
        self.center = as_sequence(center)
        self.cone = cone or ConeSpec.full_concave()
        self.sigma = float(sigma)
        self.reps = int(reps)
        self.seed = seed
        self.tol = tol
        self.workers = workers
        self._z = [gaussian(seed, r, self.center.size, self.sigma) for r in range(self.reps)]
        self._warm = [None] * self.reps
        self._cache = {}

    def samples(self, t):
        t = float(t)
        if t not in self._cache:
            out = np.empty(self.reps)
            for r, z in enumerate(self._z):
                path = BallPath(z, self.center, self.cone, warm=self._warm[r])
                out[r] = path.solve(t, tol=self.tol).value
                self._warm[r] = path.last_working_set
            self._cache[t] = out
        return self._cache[t]

    def __call__(self, t):
        return float(np.mean(self.samples(t)))

    def stderr(self, t):
        return float(mean_stderr(self.samples(t))[1])


def find_fixed_point(f, sigma=1.0, lo=None, hi=None, rel_tol=1e-2, max_steps=200):
    """Smallest radius s (to relative precision ``rel_tol``) with ``f(s) <= s^2/2``.

    Assumes ``f(t)/t`` is non-increasing, so ``f(t)/t - t/2`` changes sign
    once; bisects geometrically on that sign and returns the upper end of
    the final bracket, which satisfies the inequality.
    """
    lo = 1e-3 * sigma if lo is None else float(lo)
    hi = 1e4 * sigma if hi is None else float(hi)
    if not 0 < lo < hi:
        raise DomainError("search range needs 0 < lo < hi")
    g_lo = f(lo) - 0.5 * lo * lo
    g_hi = f(hi) - 0.5 * hi * hi
    if g_lo <= 0 or g_hi > 0:
        raise NoCrossingError(
            "no crossing of f(t) = t^2/2 in the search range",
            diagnostics={"lo": lo, "hi": hi, "g_lo": g_lo, "g_hi": g_hi})
    for _ in range(max_steps):
        if hi / lo - 1.0 <= rel_tol:
            return hi
        mid = math.sqrt(lo * hi)
        if f(mid) - 0.5 * mid * mid > 0:
            lo = mid
        else:
            hi = mid
    return hi


def mode_restricted_width(center, k, sigma, t, reps, seed, tol=1e-6, allow_nonmonotone=False):
    """Mean and standard error of the supremum over concave sequences with mode k.

    The center is expected to be monotone and concave.  Pass
    ``allow_nonmonotone=True`` to run anyway (a warning is emitted).  When
    the ball misses the mode-k set entirely the supremum is ``-inf``.
    """
    center = as_sequence(center)
    if is_monotone_concave(center) == 0:
        if not allow_nonmonotone:
            raise DomainError("center must be a monotone concave sequence")
        warnings.warn("center is not monotone concave; running anyway", stacklevel=2)
    cone = ConeSpec.mode_constrained(k)
    sups = width_samples(center, cone, sigma, [float(t)], reps, seed, tol=tol)[:, 0]
    if np.all(np.isneginf(sups)):
        return -np.inf, 0.0
    mean, se = mean_stderr(sups)
    return float(mean), float(se)


def mode_suprema(z, center, t, tol=1e-6):
    """Suprema over each mode-k set, k = 1..n, for one noise vector."""
    center = as_sequence(center)
    return np.array([BallPath(z, center, ConeSpec.mode_constrained(k)).solve(t, tol=tol).value
                     for k in range(1, center.size + 1)])


# -- bound formulas ---------------------------------------------------------

@dataclass(frozen=True)
class BoundSpec:
    """Inputs of the width and risk bounds.

    ``C`` stands in for an unspecified universal constant; ``V_term`` is the
    range term (of the center, of its de-trended part, or of the projected
    de-trended truth in the misspecified case); ``x`` is a tail parameter.
    """

    C: float
    sigma: float
    n: int
    V_term: float
    x: float = 0.0

    def __post_init__(self):
        if not self.C >= 0 or not self.sigma > 0 or self.n < 1 or self.V_term < 0 or self.x < 0:
            raise DomainError(f"invalid bound inputs: {self}")


def proposition_bound(t, spec):
    """``C sigma {(V + sigma)^(1/4) n^(1/8) t^(3/4) + sqrt(log n) t} + t^2/4``."""
    _check_t(t)
    s = spec
    return (s.C * s.sigma * ((s.V_term + s.sigma) ** 0.25 * s.n ** 0.125 * t ** 0.75
                             + math.sqrt(math.log(s.n)) * t) + t * t / 4.0)


def key1_bound(t, spec):
    """Mode-restricted bound, uniform in the mode index:
    ``C sigma (V + sigma)^(1/4) n^(1/8) t^(3/4) + 2 sigma sqrt(2 log(n+2)) t + t^2/8``.
    """
    _check_t(t)
    s = spec
    return (s.C * s.sigma * (s.V_term + s.sigma) ** 0.25 * s.n ** 0.125 * t ** 0.75
            + 2.0 * s.sigma * math.sqrt(2.0 * math.log(s.n + 2)) * t + t * t / 8.0)


def key2_bound(t, spec):
    """Bound over the whole cone for a monotone center:
    ``C sigma {(V + sigma)^(1/4) n^(1/8) t^(3/4) + sqrt(log n) t} + t^2/8``.

    One ``sigma`` multiplies both bracketed terms, as in the proposition
    bound; the printed form of this bound places its braces ambiguously.
    """
    _check_t(t)
    s = spec
    return (s.C * s.sigma * ((s.V_term + s.sigma) ** 0.25 * s.n ** 0.125 * t ** 0.75
                             + math.sqrt(math.log(s.n)) * t) + t * t / 8.0)


def _check_t(t):
    if not t >= 0:
        raise DomainError(f"t must be non-negative, got {t}")


def calibrate_constant(bound, observations):
    """Smallest ``C >= 0`` with ``observed <= bound(t, spec(C))`` at every point.

    ``observations`` is an iterable of ``(t, spec, observed)``; each bound is
    affine in C, so the constant is a maximum of ratios.
    """
    C = 0.0
    for t, spec, obs in observations:
        b0 = bound(t, _with_C(spec, 0.0))
        slope = bound(t, _with_C(spec, 1.0)) - b0
        if obs > b0:
            if slope <= 0:
                return math.inf
            C = max(C, (obs - b0) / slope)
    return C


def _with_C(spec, C):
    return BoundSpec(C, spec.sigma, spec.n, spec.V_term, spec.x)


def subgaussian_max_bound(n, a, max_mean=0.0):
    """``max_mean + 2 a (sqrt(2 log n) + sqrt(2 pi))``."""
    if n < 1 or not a > 0:
        raise DomainError("need n >= 1 and a > 0")
    return max_mean + 2.0 * a * (math.sqrt(2.0 * math.log(n)) + math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class MaxCheck:
    n: int
    a: float
    mean: float
    stderr: float
    bound: float

    @property
    def holds(self):
        return self.mean <= self.bound + 3.0 * self.stderr


def check_subgaussian_max(n, a, reps, seed):
    """Empirical ``E max`` of n iid ``N(0, a^2)`` variables against the bound."""
    rng = stream(seed, n)
    draws = a * rng.standard_normal((reps, n))
    mean, se = mean_stderr(draws.max(axis=1))
    return MaxCheck(int(n), float(a), float(mean), float(se), subgaussian_max_bound(n, a))
