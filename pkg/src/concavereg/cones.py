"""Concave sequences, the cones built from them, and elementary functionals.

Sequences live on the implicit equispaced grid ``1..n``; no abscissa is
stored.  A sequence is concave when its second differences
``theta[i-1] - 2 theta[i] + theta[i+1]`` are all non-positive.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import DomainError

MEMBERSHIP_TOL = 1e-9


class ConeKind(str, Enum):
    FULL_CONCAVE = "concave"
    MODE_CONSTRAINED = "mode"
    THREE_BLOCK = "three_block"
    ORTHO_AFFINE = "ortho_affine"
    BOUNDED_CONCAVE = "bounded"


@dataclass(frozen=True)
class ConeSpec:
    """Description of a closed convex feasible set of sequences.

    Use the classmethod constructors rather than filling fields directly.
    ``bound`` adds the box ``|theta_i| <= bound`` to any kind.  A
    ``THREE_BLOCK`` spec with ``m1 = m2 = None`` denotes the union over all
    breakpoints; it supports membership tests and sampling but not
    projection (the union is not convex).
    """

    kind: ConeKind
    k: Optional[int] = None
    m1: Optional[int] = None
    m2: Optional[int] = None
    bound: Optional[float] = None

    def __post_init__(self):
        if self.kind is ConeKind.MODE_CONSTRAINED:
            if self.k is None or self.k < 1:
                raise DomainError(f"mode index must be >= 1, got {self.k}")
        if self.kind is ConeKind.THREE_BLOCK:
            if (self.m1 is None) != (self.m2 is None):
                raise DomainError("give both breakpoints or neither")
            if self.m1 is not None and not 0 <= self.m1 < self.m2:
                raise DomainError(
                    f"breakpoints need 0 <= m1 < m2, got ({self.m1}, {self.m2})")
        if self.kind is ConeKind.BOUNDED_CONCAVE and self.bound is None:
            raise DomainError("bounded concave set needs a bound")
        if self.bound is not None and not self.bound > 0:
            raise DomainError(f"bound must be positive, got {self.bound}")

    @classmethod
    def full_concave(cls):
        return cls(ConeKind.FULL_CONCAVE)

    @classmethod
    def mode_constrained(cls, k):
        """Concave sequences whose maximum is attained at (1-based) index k."""
        return cls(ConeKind.MODE_CONSTRAINED, k=int(k))

    @classmethod
    def three_block(cls, m1=None, m2=None, bound=None):
        """Sequences concave on ``[1, m1]``, ``[m1+1, m2-1]`` and ``[m2, n]``."""
        if m1 is not None:
            m1, m2 = int(m1), int(m2)
        return cls(ConeKind.THREE_BLOCK, m1=m1, m2=m2, bound=bound)

    @classmethod
    def ortho_affine(cls):
        """Concave sequences orthogonal to every affine sequence."""
        return cls(ConeKind.ORTHO_AFFINE)

    @classmethod
    def bounded_concave(cls, bound):
        return cls(ConeKind.BOUNDED_CONCAVE, bound=float(bound))

    @property
    def is_cone(self):
        return self.bound is None

    def check_length(self, n):
        """Raise DomainError if the set is not defined for length-n sequences."""
        if n < 1:
            raise DomainError("sequences need at least one entry")
        if self.kind is ConeKind.MODE_CONSTRAINED and self.k > n:
            raise DomainError(f"mode index {self.k} exceeds length {n}")
        if self.kind is ConeKind.THREE_BLOCK and self.m2 is not None and self.m2 > n + 1:
            raise DomainError(f"breakpoint m2={self.m2} exceeds n+1={n + 1}")
        if self.kind in (ConeKind.FULL_CONCAVE, ConeKind.ORTHO_AFFINE,
                         ConeKind.BOUNDED_CONCAVE, ConeKind.MODE_CONSTRAINED) and n < 3:
            raise DomainError(f"concave cone needs n >= 3, got n={n}")


def as_sequence(theta):
    """Return ``theta`` as a finite 1-d float array, raising on anything else."""
    arr = np.asarray(theta, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"expected a non-empty 1-d sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("sequence has non-finite entries")
    return arr


def second_differences(theta):
    """Second differences ``theta[j] - 2 theta[j+1] + theta[j+2]``, length n-2.

    >>> second_differences([0.0, 1.0, 0.0])
    array([-2.])
    """
    theta = as_sequence(theta)
    if theta.size < 3:
        raise DomainError(f"second differences need n >= 3, got n={theta.size}")
    return theta[:-2] - 2.0 * theta[1:-1] + theta[2:]


def block_labels(n, m1, m2):
    """Block index (0, 1, 2) of every position for breakpoints (m1, m2)."""
    pos = np.arange(1, n + 1)
    return np.where(pos <= m1, 0, np.where(pos < m2, 1, 2))


def constrained_positions(n, cone):
    """Boolean mask over the n-2 second-difference rows that the cone imposes."""
    if n < 3:
        return np.zeros(0, dtype=bool)
    if cone.kind is ConeKind.THREE_BLOCK:
        lab = block_labels(n, cone.m1, cone.m2)
        return (lab[:-2] == lab[1:-1]) & (lab[1:-1] == lab[2:])
    return np.ones(n - 2, dtype=bool)


def _is_concave_blocks(theta, m1, m2, tol):
    n = theta.size
    if n < 3:
        return True
    mask = constrained_positions(n, ConeSpec.three_block(m1, m2))
    d2 = second_differences(theta)
    return bool(np.all(d2[mask] <= tol))


def find_three_block_breakpoints(theta, tol=MEMBERSHIP_TOL):
    """Breakpoints (m1, m2) making ``theta`` three-block concave, or None.

    Takes the longest concave prefix as the first block and the longest
    concave suffix as the third; any valid split has a middle block
    containing this one, and sub-blocks of concave blocks stay concave.
    """
    theta = as_sequence(theta)
    n = theta.size
    if n < 3:
        return (n, n + 1)
    bad = np.flatnonzero(second_differences(theta) > tol)
    if bad.size == 0:
        return (n, n + 1)
    m1 = int(bad[0]) + 2
    m2 = max(int(bad[-1]) + 2, m1 + 1)
    middle = theta[m1:m2 - 1]
    if middle.size >= 3 and np.any(second_differences(middle) > tol):
        return None
    return (m1, m2)


def is_member(theta, cone, tol=MEMBERSHIP_TOL):
    """True iff ``theta`` satisfies every defining inequality of ``cone`` within tol."""
    theta = as_sequence(theta)
    n = theta.size
    cone.check_length(n)
    if cone.bound is not None and np.max(np.abs(theta)) > cone.bound + tol:
        return False
    if cone.kind is ConeKind.THREE_BLOCK:
        if cone.m1 is None:
            return find_three_block_breakpoints(theta, tol) is not None
        return _is_concave_blocks(theta, cone.m1, cone.m2, tol)
    if np.any(second_differences(theta) > tol):
        return False
    if cone.kind is ConeKind.MODE_CONSTRAINED:
        return bool(np.max(theta) <= theta[cone.k - 1] + tol)
    if cone.kind is ConeKind.ORTHO_AFFINE:
        u1, u2 = affine_basis(n)
        scale = max(1.0, float(np.max(np.abs(theta))))
        return bool(abs(u1 @ theta) <= tol * scale and abs(u2 @ theta) <= tol * scale)
    return True


@lru_cache(maxsize=64)
def _affine_basis_cached(n):
    u1 = np.full(n, 1.0 / np.sqrt(n))
    i = np.arange(1, n + 1, dtype=float)
    c = i - i.mean()
    nc = np.linalg.norm(c)
    u2 = c / nc if nc > 0 else np.zeros(n)
    u1.setflags(write=False)
    u2.setflags(write=False)
    return u1, u2


def affine_basis(n):
    """Orthonormal basis of the affine sequences ``a + b*i`` in R^n."""
    return _affine_basis_cached(int(n))


def project_affine(theta):
    """Least-squares fit of ``theta`` by ``a + b*i``, i = 1..n.

    >>> project_affine([0.0, 0.0, 3.0])
    array([-0.5,  1. ,  2.5])
    """
    theta = as_sequence(theta)
    u1, u2 = affine_basis(theta.size)
    return (u1 @ theta) * u1 + (u2 @ theta) * u2


def range_V(theta):
    """Range ``max(theta) - min(theta)``."""
    theta = as_sequence(theta)
    return float(np.max(theta) - np.min(theta))


def mode_index(theta, tol=MEMBERSHIP_TOL):
    """Smallest 1-based index attaining the maximum of a concave sequence."""
    theta = as_sequence(theta)
    if theta.size < 3 or np.any(second_differences(theta) > tol):
        raise DomainError("mode index is defined for concave sequences (n >= 3)")
    return int(np.argmax(theta)) + 1


def is_monotone_concave(theta, tol=MEMBERSHIP_TOL):
    """Return +1 if non-decreasing concave, -1 if non-increasing concave, else 0."""
    theta = as_sequence(theta)
    if theta.size >= 3 and np.any(second_differences(theta) > tol):
        return 0
    d = np.diff(theta)
    if np.all(d >= -tol):
        return 1
    if np.all(d <= tol):
        return -1
    return 0
