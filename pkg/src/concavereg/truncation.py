"""Clamping a concave sequence into a band around a monotone concave reference.

Given a non-decreasing concave ``theta_star`` and a level ``L``, entries of
``theta`` below ``theta_star[0] - L`` are raised to that level and entries
above ``theta_star[-1] + L`` are lowered to it.  The clamped sequence is
concave on at most three blocks and never moves farther from
``theta_star`` than ``theta`` was.
"""

import math
from dataclasses import dataclass

import numpy as np

from .cones import (ConeSpec, as_sequence, is_member, is_monotone_concave, range_V,
                    second_differences)
from .errors import DomainError

DEFAULT_L_OVER_SIGMA = 128.0


@dataclass(frozen=True)
class TruncationResult:
    truncated: np.ndarray
    S1: np.ndarray  # 0-based indices raised to lower_clamp
    S2: np.ndarray  # 0-based indices lowered to upper_clamp
    level_L: float
    lower_clamp: float
    upper_clamp: float
    reversed: bool = False

    @property
    def breakpoints(self):
        """Breakpoints (m1, m2), 1-based, read off the lower set.

        The first block is the left run of ``S1``, the third its right
        run; everything between forms the middle block.
        """
        n = self.truncated.size
        left, right = _boundary_runs(self.S1, n)
        return left, n + 1 - right


def _boundary_runs(idx, n):
    """Lengths of the runs of ``idx`` touching index 0 and index n-1."""
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    left = n if mask.all() else int(np.argmin(mask))
    right = 0 if left == n else int(np.argmin(mask[::-1]))
    return left, right


def _check_concave(theta, name, tol):
    if theta.size < 3 or np.any(second_differences(theta) > tol):
        raise DomainError(f"{name} must be concave with n >= 3")


def truncate(theta, theta_star, L, tol=1e-9):
    """Clamp ``theta`` to ``[theta_star[0] - L, theta_star[-1] + L]``.

    Parameters
    ----------
    theta : array_like
        Concave sequence.
    theta_star : array_like
        Monotone concave reference of the same length.  A non-increasing
        reference is handled by reversing both inputs, clamping, and
        reversing back.
    L : float
        Positive band half-width.

    Returns
    -------
    TruncationResult
        ``S1``/``S2`` are 0-based index arrays in the caller's orientation.
    """
    theta = as_sequence(theta)
    theta_star = as_sequence(theta_star)
    if theta.size != theta_star.size:
        raise DomainError("theta and theta_star must have the same length")
    if not L > 0:
        raise DomainError(f"L must be positive, got {L}")
    _check_concave(theta, "theta", tol)
    _check_concave(theta_star, "theta_star", tol)
    direction = is_monotone_concave(theta_star, tol)
    if direction == 0:
        raise DomainError("theta_star must be monotone")
    flip = direction < 0 and theta_star[0] != theta_star[-1]
    if flip:
        theta, theta_star = theta[::-1], theta_star[::-1]
    lo = float(theta_star[0] - L)
    hi = float(theta_star[-1] + L)
    s1 = np.flatnonzero(theta < lo)
    s2 = np.flatnonzero(theta > hi)
    out = np.clip(theta, lo, hi)
    if flip:
        n = theta.size
        out = out[::-1].copy()
        s1 = np.sort(n - 1 - s1)
        s2 = np.sort(n - 1 - s2)
    return TruncationResult(out, s1, s2, float(L), lo, hi, bool(flip))


def check_contractive(theta, theta_star, result):
    """``max_i |theta_i - theta'_i| - |theta_i - theta*_i|``; non-positive when contractive."""
    theta = as_sequence(theta)
    theta_star = as_sequence(theta_star)
    return float(np.max(np.abs(theta - result.truncated) - np.abs(theta - theta_star)))


def is_interval(idx):
    return idx.size == 0 or int(idx[-1]) - int(idx[0]) + 1 == idx.size


def check_structure(theta, theta_star, result, k=None, tol=1e-9):
    """List of violated structural claims (empty when all hold).

    Checks the clamp band, three-block concavity with the breakpoints read
    off ``S1``, that ``S1`` is a union of at most two boundary runs, that
    ``S2`` is one interval, and that ``S2`` contains the mode ``k`` (1-based)
    when it is non-empty.
    """
    theta = as_sequence(theta)
    out = result.truncated
    n = out.size
    bad = []
    if np.min(out) < result.lower_clamp - tol or np.max(out) > result.upper_clamp + tol:
        bad.append("clamp bounds")
    if np.intersect1d(result.S1, result.S2).size:
        bad.append("S1 and S2 overlap")
    left, right = _boundary_runs(result.S1, n)
    if left + right < result.S1.size and left < n:
        bad.append("S1 is not two boundary intervals")
    if not is_interval(result.S2):
        bad.append("S2 is not an interval")
    if k is not None and result.S2.size and not (result.S2[0] <= k - 1 <= result.S2[-1]):
        bad.append("S2 misses the mode")
    m1, m2 = result.breakpoints
    if m1 < m2 and not is_member(out, ConeSpec.three_block(m1, m2), tol=tol * max(1.0, np.max(np.abs(out)))):
        bad.append("not three-block concave")
    return bad


@dataclass(frozen=True)
class LevelSetReport:
    levels: np.ndarray  # 2^j L
    counts: np.ndarray
    caps: np.ndarray  # v_j
    violations: tuple

    @property
    def ok(self):
        return not self.violations


def level_set_cardinalities(theta, theta_star, t, L, k=None, rel_tol=1e-9):
    """Exceedance counts ``|{i: |theta_i - theta*_i| > 2^j L}|`` against ``t^2 / (2^{2j} L^2)``.

    Also checks that the exceedances below the band sit in two boundary runs
    of length at most ``v_j`` and those above it lie within ``v_j`` of the
    mode ``k`` (1-based; defaults to the mode of ``theta``).  A
    non-increasing reference is handled by reversal.  Levels stop once
    ``2^j L`` exceeds the largest deviation.
    """
    theta = as_sequence(theta)
    theta_star = as_sequence(theta_star)
    dev = theta - theta_star
    if float(np.linalg.norm(dev)) > t * (1.0 + rel_tol) + rel_tol:
        raise DomainError("need |theta - theta_star| <= t")
    if not L > 0:
        raise DomainError("L must be positive")
    if k is None:
        k = int(np.argmax(theta)) + 1
    n = theta.size
    if is_monotone_concave(theta_star) < 0 and theta_star[0] != theta_star[-1]:
        theta, theta_star, k = theta[::-1], theta_star[::-1], n + 1 - k
    top = math.ceil(math.log2(max((range_V(theta) + range_V(theta_star) + L) / L, 1.0)))
    adev = np.abs(dev)
    jmax = max(top, 0)
    while 2.0 ** jmax * L < adev.max():
        jmax += 1
    levels, counts, caps, bad = [], [], [], []
    for j in range(jmax + 1):
        level = 2.0 ** j * L
        v = t * t / (4.0 ** j * L * L)
        cnt = int(np.count_nonzero(adev > level))
        levels.append(level)
        counts.append(cnt)
        caps.append(v)
        if cnt > v * (1.0 + rel_tol):
            bad.append(f"j={j}: count {cnt} > cap {v:.6g}")
        below = np.flatnonzero(theta < theta_star[0] - level)
        above = np.flatnonzero(theta > theta_star[-1] + level)
        left, right = _boundary_runs(below, n)
        if left < n and (left + right < below.size or max(left, right) > v * (1 + rel_tol)):
            bad.append(f"j={j}: lower exceedances not in two boundary runs of length <= v_j")
        if above.size and np.max(np.abs(above - (k - 1))) >= v * (1 + rel_tol) + 1e-12:
            bad.append(f"j={j}: upper exceedances farther than v_j from the mode")
    return LevelSetReport(np.array(levels), np.array(counts), np.array(caps), tuple(bad))


def default_level(sigma):
    """Band half-width used by the risk analysis: 128 sigma."""
    return DEFAULT_L_OVER_SIGMA * float(sigma)
