"""Monte-Carlo risk and regret of the concave least-squares estimator.

Each replication draws ``z ~ N(0, sigma^2 I)`` from its own seeded stream,
forms ``y = theta* + z`` and projects onto the concave cone.  Reports hold
the per-replication losses so every summary can be recomputed.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Optional

import numpy as np

from .cones import ConeSpec, as_sequence, is_member, project_affine, range_V
from .errors import DomainError, FitError, SolverError
from .projection import DEFAULT_TOL, project, project_ortho_affine
from .rng import mean_stderr, run_replications, stream

QUANTILE_LEVELS = (0.5, 0.9, 0.99)
MAX_FAILURE_RATE = 0.01
DEFAULT_NGRID = (64, 128, 256, 512, 1024, 2048, 4096)


class Family(str, Enum):
    AFFINE = "affine"
    QUADRATIC = "quadratic"
    PIECEWISE_LINEAR = "piecewise"
    MISSPECIFIED_CONVEX = "convex"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SignalSpec:
    """A true mean sequence on the grid ``x_i = (i-1)/(n-1)``.

    ``affine``: ``a + b x``; ``quadratic``: ``scale (1 - (2x-1)^2)``;
    ``piecewise``: concave tent-like chain of ``pieces`` linear pieces with
    peak height ``scale``; ``convex``: ``scale (2x-1)^2``; ``custom``: the
    given ``values``.
    """

    family: Family
    n: int
    scale: float = 1.0
    a: float = 0.0
    b: float = 0.0
    pieces: int = 3
    values: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.CUSTOM:
            if self.values is None:
                raise DomainError("custom signal needs values")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            object.__setattr__(self, "n", len(self.values))
        if self.n < 3:
            raise DomainError("signals need n >= 3")
        if self.pieces < 1:
            raise DomainError("pieces must be positive")

    @classmethod
    def custom(cls, values):
        return cls(Family.CUSTOM, len(values), values=tuple(values))

    def with_n(self, n):
        if self.family is Family.CUSTOM:
            raise DomainError("a custom signal has a fixed length")
        return SignalSpec(self.family, int(n), self.scale, self.a, self.b, self.pieces)

    def sequence(self):
        n = self.n
        x = np.linspace(0.0, 1.0, n)
        fam = self.family
        if fam is Family.AFFINE:
            return self.a + self.b * x
        if fam is Family.QUADRATIC:
            return self.scale * (1.0 - (2.0 * x - 1.0) ** 2)
        if fam is Family.MISSPECIFIED_CONVEX:
            return self.scale * (2.0 * x - 1.0) ** 2
        if fam is Family.PIECEWISE_LINEAR:
            return self.scale * _tent_chain(x, self.pieces)
        return np.array(self.values, dtype=float)


def _tent_chain(x, k):
    """Concave piecewise-linear profile with k equal pieces, max value 1."""
    if k == 1:
        return x
    slopes = np.linspace(1.0, -1.0, k)
    knots = np.linspace(0.0, 1.0, k + 1)
    seg = np.minimum((x * k).astype(int), k - 1)
    base = np.concatenate([[0.0], np.cumsum(slopes * np.diff(knots))])
    v = base[seg] + slopes[seg] * (x - knots[seg])
    return v / np.max(np.abs(v)) if np.max(np.abs(v)) > 0 else v


@dataclass(frozen=True)
class RiskReport:
    signal: SignalSpec
    sigma: float
    reps: int
    seed: int
    mean_loss: float
    stderr: float
    quantiles: tuple  # ((p, value), ...)
    failures: int = 0
    offset: Optional[float] = None
    H: Optional[float] = None
    regret_mean: Optional[float] = None
    regret_stderr: Optional[float] = None
    losses: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return self.signal.n


def noise(seed, n, rep, sigma):
    """Noise of replication ``rep`` at length n; streams differ across n."""
    return sigma * stream(seed, n, rep).standard_normal(n)


def _rep_loss(rep, theta_star, sigma, seed, tol):
    n = theta_star.size
    y = theta_star + noise(seed, n, rep, sigma)
    try:
        fit = project(y, ConeSpec.full_concave(), tol=tol)
    except SolverError:
        return math.nan
    d = fit.point - theta_star
    return float(d @ d) / n


def _losses(theta_star, sigma, reps, seed, tol, workers):
    fn = partial(_rep_loss, theta_star=theta_star, sigma=float(sigma), seed=seed, tol=tol)
    losses = np.array(run_replications(fn, reps, workers), dtype=float)
    failures = int(np.count_nonzero(np.isnan(losses)))
    if failures > MAX_FAILURE_RATE * reps:
        raise SolverError(f"{failures} of {reps} replications failed to converge")
    return losses[~np.isnan(losses)], failures


def _quantiles(values):
    return tuple((p, float(np.quantile(values, p, method="inverted_cdf"))) for p in QUANTILE_LEVELS)


def _check_run(sigma, reps):
    if reps < 2:
        raise DomainError("reps must be at least 2")
    if not sigma >= 0:
        raise DomainError("sigma must be non-negative")


def run_risk(signal, sigma=1.0, reps=200, seed=None, tol=DEFAULT_TOL, workers=1):
    """Monte-Carlo risk ``E |theta_hat - theta*|^2 / n`` of the concave LSE.

    Parameters
    ----------
    signal : SignalSpec
    sigma : float
        Known noise level (0 gives the noiseless fit).
    reps : int
        Replications, at least 2.
    seed : int
        Base seed; replication r at length n uses stream ``(seed, n, r)``.
    tol : float
        Projection KKT tolerance.
    workers : int
        Worker processes; results do not depend on it.

    Returns
    -------
    RiskReport
        Replications whose projection fails are dropped and counted; more
        than 1% failures raises SolverError.
    """
    _check_run(sigma, reps)
    theta_star = signal.sequence()
    losses, failures = _losses(theta_star, sigma, reps, seed, tol, workers)
    mean, se = mean_stderr(losses)
    return RiskReport(signal, float(sigma), int(reps), int(seed), float(mean), float(se),
                      _quantiles(losses), failures, losses=losses)


def misspecification_offset(theta_star, tol=DEFAULT_TOL):
    """``(|Pi(mu*) - mu*|^2 / n, V(Pi(mu*)))`` for the de-trended truth ``mu*``.

    ``Pi`` projects onto concave sequences orthogonal to affine ones.
    """
    theta_star = as_sequence(theta_star)
    mu = theta_star - project_affine(theta_star)
    pm = project_ortho_affine(mu, tol=tol).point
    d = pm - mu
    return float(d @ d) / theta_star.size, range_V(pm)


def run_regret(signal, sigma=1.0, reps=200, seed=None, tol=DEFAULT_TOL, workers=1):
    """Risk report whose per-replication regret is loss minus the best-fit offset.

    The offset is computed once, without noise; for concave truths it is 0
    and the regret equals the loss.
    """
    _check_run(sigma, reps)
    theta_star = signal.sequence()
    offset, H = misspecification_offset(theta_star, tol)
    losses, failures = _losses(theta_star, sigma, reps, seed, tol, workers)
    mean, se = mean_stderr(losses)
    return RiskReport(signal, float(sigma), int(reps), int(seed), float(mean), float(se),
                      _quantiles(losses), failures, offset=offset, H=H,
                      regret_mean=float(mean - offset), regret_stderr=float(se), losses=losses)


def run_grid(signal, ngrid=DEFAULT_NGRID, sigma=1.0, reps=200, seed=None, regret=False,
             tol=DEFAULT_TOL, workers=1):
    runner = run_regret if regret else run_risk
    return [runner(signal.with_n(n), sigma, reps, seed, tol, workers) for n in ngrid]


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float


def fit_log_log(ns, means, stderrs=None):
    """Weighted least squares of ``log mean`` on ``log n``.

    The weight of a point is ``1 / var(log mean)``, with the variance of the
    log taken by the delta method as ``(stderr / mean)^2``.  Without
    stderrs all weights are one.
    """
    ns = np.asarray(ns, dtype=float)
    means = np.asarray(means, dtype=float)
    if ns.size < 4 or np.unique(ns).size < 4:
        raise FitError("need at least four distinct n")
    if np.any(means <= 0) or np.any(ns <= 0):
        raise FitError("log-log fit needs positive values")
    x, y = np.log(ns), np.log(means)
    if stderrs is None:
        w = np.ones_like(x)
    else:
        rel = np.asarray(stderrs, dtype=float) / means
        if np.any(rel <= 0):
            raise FitError("stderrs must be positive")
        w = 1.0 / rel ** 2
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    syy = np.sum(w * (y - ym) ** 2)
    r2 = 1.0 - np.sum(w * resid ** 2) / syy if syy > 0 else 1.0
    return RateFit(float(slope), float(intercept), float(r2))


def fit_rate(reports, regret=False):
    """Rate fit of mean loss (or mean regret) against n across reports."""
    if regret:
        means = [r.regret_mean for r in reports]
        ses = [r.regret_stderr for r in reports]
    else:
        means = [r.mean_loss for r in reports]
        ses = [r.stderr for r in reports]
    return fit_log_log([r.n for r in reports], means, ses)


def affine_part_chi2(n, sigma=1.0, reps=10000, seed=None):
    """Mean and stderr of ``|P_L z|^2 / sigma^2``, whose expectation is 2."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    vals = np.empty(reps)
    for r in range(reps):
        z = noise(seed, n, r, sigma)
        p = project_affine(z)
        vals[r] = (p @ p) / sigma ** 2
    mean, se = mean_stderr(vals)
    return float(mean), float(se)


def decomposition_residuals(theta_star, z, tol=DEFAULT_TOL):
    """Relative residuals of the two orthogonal-decomposition identities for one draw.

    ``|fit - theta*|^2 = |Pi(mu* + z) - mu*|^2 + |P_L z|^2`` and
    ``fit = Pi(mu* + z) + P_L(theta* + z)``, with ``Pi`` the projection onto
    concave sequences orthogonal to affine ones, computed from its own solve.
    """
    theta_star = as_sequence(theta_star)
    z = as_sequence(z)
    y = theta_star + z
    fit = project(y, tol=tol).point
    mu = theta_star - project_affine(theta_star)
    ortho = project_ortho_affine(mu + z, tol=tol).point
    pz = project_affine(z)
    lhs = float(np.sum((fit - theta_star) ** 2))
    rhs = float(np.sum((ortho - mu) ** 2) + pz @ pz)
    # floor the denominator so a near-exact fit (lhs ~ rhs ~ 0) is not 0/0
    denom = max(lhs, rhs, 1e-12 * max(1.0, float(y @ y)))
    r1 = abs(lhs - rhs) / denom
    gap = fit - (ortho + project_affine(y))
    scale = max(float(np.linalg.norm(fit)), 1.0)
    r2 = float(np.linalg.norm(gap)) / scale
    return r1, r2


def decomposition_audit(signal, sigma=1.0, reps=500, seed=None, tol=DEFAULT_TOL):
    """Largest relative residual of the decomposition identities over replications."""
    theta_star = signal.sequence()
    if not is_member(theta_star, ConeSpec.full_concave()):
        raise DomainError("decomposition audit needs a concave truth")
    worst = 0.0
    for r in range(reps):
        worst = max(worst, *decomposition_residuals(theta_star, noise(seed, signal.n, r, sigma), tol))
    return worst


@dataclass(frozen=True)
class TailRow:
    x: float
    threshold: float
    fraction: float
    prob_bound: float
    stderr: float

    @property
    def holds(self):
        return self.fraction <= self.prob_bound + 3.0 * self.stderr


def rate_term(sigma, V, n):
    """``sigma^(8/5) (V + sigma)^(2/5) n^(-4/5)``."""
    return sigma ** 1.6 * (V + sigma) ** 0.4 * n ** -0.8


def highprob_audit(signal, sigma=1.0, reps=200, x_grid=(1.0, 2.0, 4.0), seed=None,
                   tol=DEFAULT_TOL, workers=1, report=None):
    """Exceedance frequencies of the high-probability loss bound.

    The threshold at x is ``sigma^2 (2 + 17 x) / n + C rate_term``; C is
    set so that the x = 0 threshold equals the median loss.  The allowed
    exceedance probability is ``exp(-x) + exp(-x^2/16)``.
    """
    theta_star = signal.sequence()
    if not is_member(theta_star, ConeSpec.full_concave()):
        raise DomainError("tail audit needs a concave truth")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if report is None:
        report = run_risk(signal, sigma, reps, seed, tol, workers)
    losses = report.losses
    n = signal.n
    mu = theta_star - project_affine(theta_star)
    term = rate_term(sigma, range_V(mu), n)
    med = float(np.quantile(losses, 0.5, method="inverted_cdf"))
    C = max(0.0, (med - 2.0 * sigma ** 2 / n) / term)
    rows = []
    for x in x_grid:
        thr = sigma ** 2 * (2.0 + 17.0 * x) / n + C * term
        frac = float(np.mean(losses > thr))
        se = math.sqrt(max(frac * (1.0 - frac), 0.0) / losses.size)
        rows.append(TailRow(float(x), thr, frac, math.exp(-x) + math.exp(-x * x / 16.0), se))
    return rows
