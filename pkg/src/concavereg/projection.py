"""Euclidean projection onto concave-type cones with KKT certificates.

The solver is a primal active-set method.  Its working set always contains
some of the second-difference constraints; the positions where such a
constraint is *not* in the working set are the knots of a linear spline, so
every equality-constrained subproblem is a least-squares spline fit.  The fit
uses the hat-function basis on the knots, whose Gram matrix is tridiagonal
and well conditioned, and is solved by a banded Cholesky factorisation in
O(n).  A few extra local inequalities (mode and box constraints) are handled
by a small Schur complement on top of the spline fit.

Multipliers of the second-difference constraints are recovered from the
residual by a double cumulative sum: ``mu_j = <r, (j + 1 - i)_+>``, the inner
product with a concave hinge, which is also the generator form of the polar
cone condition.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import solveh_banded
from scipy.optimize import nnls

from .cones import (ConeKind, ConeSpec, as_sequence, constrained_positions,
                    is_member, project_affine)
from .errors import DomainError, SolverError

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class WorkingSet:
    """Solver state that can warm-start a later projection onto the same cone."""

    point: np.ndarray
    knots: np.ndarray   # bool over positions; True where theta may kink
    extras: np.ndarray  # bool over extra rows in the working set


@dataclass(frozen=True)
class ProjectionResult:
    """Projected point plus the multipliers and residuals certifying it.

    ``duals`` holds one multiplier per inequality of the cone: first the
    second-difference rows (zero where the cone imposes none), then the extra
    mode or box rows.  Multipliers of inactive rows are zero up to rounding.
    ``kkt_residual`` is the largest of the scaled primal infeasibility, dual
    infeasibility, complementarity and stationarity residuals; the scale is
    ``max(1, max|y|)``.
    """

    point: np.ndarray
    duals: np.ndarray
    kkt_residual: float
    iterations: int
    working_set: Optional[WorkingSet] = field(default=None, repr=False)

    def same_face(self, other):
        """True when both results come from the same final working set."""
        a, b = self.working_set, other.working_set
        return (a is not None and b is not None
                and np.array_equal(a.knots, b.knots)
                and np.array_equal(a.extras, b.extras))


def _extra_rows(n, cone):
    """Dense rows (A, b) of the non-second-difference inequalities ``A x <= b``."""
    rows, rhs = [], []
    if cone.kind is ConeKind.MODE_CONSTRAINED:
        k = cone.k - 1
        for nb in (k - 1, k + 1):
            if 0 <= nb < n:
                a = np.zeros(n)
                a[nb], a[k] = 1.0, -1.0
                rows.append(a)
                rhs.append(0.0)
    if cone.bound is not None:
        eye = np.eye(n)
        rows.extend(eye)
        rows.extend(-eye)
        rhs.extend([cone.bound] * (2 * n))
    if not rows:
        return np.zeros((0, n)), np.zeros(0)
    return np.array(rows), np.array(rhs)


@lru_cache(maxsize=32)
def _hinge_norms(n):
    # smaller of the left and right hinge norms at each interior position;
    # both hinges give the same inner product with a residual orthogonal to L
    j = np.arange(1, n - 1, dtype=float)       # left hinge has values j..1
    k = n - 1 - j                              # right hinge has values k..1
    left = np.sqrt(j * (j + 1) * (2 * j + 1) / 6.0)
    right = np.sqrt(k * (k + 1) * (2 * k + 1) / 6.0)
    out = np.minimum(left, right)
    out.setflags(write=False)
    return out


class _Problem:
    """Constraint data for projecting length-n sequences onto one cone."""

    def __init__(self, n, cone):
        self.n = n
        self.cone = cone
        self.conc = constrained_positions(n, cone)        # rows j <-> position j+1
        self.A, self.b = _extra_rows(n, cone)
        self.a_norm = np.linalg.norm(self.A, axis=1) if self.A.size else np.zeros(0)
        self.h_norm = _hinge_norms(n) if n >= 3 else np.zeros(0)
        # positions that are always knots: endpoints and unconstrained interiors
        always = np.ones(n, dtype=bool)
        if n >= 3:
            always[1:-1] = ~self.conc
        self.always_knot = always

    def initial(self):
        # zero is feasible for every set here; start with all rows active
        return WorkingSet(np.zeros(self.n), self.always_knot.copy(),
                          np.zeros(self.A.shape[0], dtype=bool))


def _spline_layout(knots):
    """Segment index and interpolation weight of each position for a knot set."""
    x = np.flatnonzero(knots)
    n = knots.size
    if x.size == 1:
        return x, np.zeros(n, dtype=np.intp), np.zeros(n)
    pos = np.arange(n)
    seg = np.searchsorted(x, pos, side="right") - 1
    seg = np.minimum(seg, x.size - 2)
    w = (pos - x[seg]) / (x[seg + 1] - x[seg])
    return x, seg, w


def _fit_spline(y, knots, A_w, b_w):
    """Least-squares linear spline on ``knots`` subject to ``A_w theta = b_w``.

    Returns (theta, nu) where nu are the multipliers of the equality rows.
    """
    n = y.size
    x, seg, w = _spline_layout(knots)
    m = x.size
    if m == 1:
        # single basis function: the constant sequence
        basis = np.ones((n, 1))
        G = np.array([[float(n)]])
        rhs = np.array([y.sum()])
        E = A_w @ basis if A_w.shape[0] else np.zeros((0, 1))
        return _solve_dense(basis, G, rhs, E, b_w)
    v = 1.0 - w
    diag = np.bincount(seg, v * v, minlength=m) + np.bincount(seg + 1, w * w, minlength=m)
    off = np.bincount(seg, v * w, minlength=m)[:-1]
    rhs = np.bincount(seg, v * y, minlength=m) + np.bincount(seg + 1, w * y, minlength=m)
    ab = np.zeros((2, m))
    ab[0, 1:] = off
    ab[1] = diag
    if A_w.shape[0] == 0:
        c = solveh_banded(ab, rhs, check_finite=False)
        return c[seg] * v + c[seg + 1] * w, np.zeros(0)
    E = np.empty((A_w.shape[0], m))
    for r, a in enumerate(A_w):
        E[r] = np.bincount(seg, a * v, minlength=m) + np.bincount(seg + 1, a * w, minlength=m)
    sol = solveh_banded(ab, np.column_stack([rhs, E.T]), check_finite=False)
    c0, X = sol[:, 0], sol[:, 1:]
    S = E @ X
    nu = np.linalg.solve(S, E @ c0 - b_w)
    c = c0 - X @ nu
    return c[seg] * v + c[seg + 1] * w, nu


def _solve_dense(basis, G, rhs, E, e):
    if E.shape[0] == 0:
        c = np.linalg.solve(G, rhs)
        return basis @ c, np.zeros(0)
    X = np.linalg.solve(G, E.T)
    c0 = np.linalg.solve(G, rhs)
    nu = np.linalg.solve(E @ X, E @ c0 - e)
    return basis @ (c0 - X @ nu), nu


def _conc_multipliers(r):
    """Multipliers of all second-difference rows from a stationarity residual."""
    return np.cumsum(np.cumsum(r))[:-2]


def _second_diff(theta):
    return theta[:-2] - 2.0 * theta[1:-1] + theta[2:]


def _kkt(prob, y, theta, ws, nu_w):
    """Scaled KKT residual and full multiplier vector at a candidate optimum."""
    n = prob.n
    scale = max(1.0, float(np.max(np.abs(y))))
    nu = np.zeros(prob.A.shape[0])
    nu[ws.extras] = nu_w
    r = y - theta
    if nu.size:
        r = r - prob.A.T @ nu
    if n >= 3:
        mu = _conc_multipliers(r)
        mu = np.where(prob.conc, mu, 0.0)
        # stationarity: y - theta - A^T nu must equal D^T mu
        dt_mu = np.convolve(mu, [1.0, -2.0, 1.0])
        stat = float(np.max(np.abs(dt_mu - r)))
        d2 = _second_diff(theta)
        primal = float(np.max(np.where(prob.conc, d2, -np.inf) / np.sqrt(6.0), initial=0.0))
        mu_hat = mu / prob.h_norm
        dual = float(np.max(-mu_hat, initial=0.0))
        comp = float(np.max(np.abs(mu_hat * d2) / np.sqrt(6.0), initial=0.0))
    else:
        mu = np.zeros(0)
        stat = float(np.max(np.abs(r)))
        primal = dual = comp = 0.0
    if nu.size:
        slack = (prob.A @ theta - prob.b) / prob.a_norm
        nu_hat = nu * prob.a_norm
        primal = max(primal, float(np.max(slack, initial=0.0)))
        dual = max(dual, float(np.max(-nu_hat, initial=0.0)))
        comp = max(comp, float(np.max(np.abs(nu_hat * slack))))
    res = max(primal / scale, dual / scale, comp / scale**2, stat / scale)
    return res, np.concatenate([mu, nu])


def _active_set(prob, y, tol, max_iter, start):
    n = prob.n
    scale = max(1.0, float(np.max(np.abs(y))))
    block_eps = 1e-12 * scale
    drop_tol = 0.5 * tol * scale
    theta = start.point.copy()
    knots = start.knots.copy()
    extras = start.extras.copy()
    has_conc = n >= 3
    for it in range(1, max_iter + 1):
        A_w, b_w = prob.A[extras], prob.b[extras]
        theta_eq, nu_w = _fit_spline(y, knots, A_w, b_w)
        p = theta_eq - theta

        # ratio test over inequalities outside the working set
        alpha, block = 1.0, None
        if has_conc:
            free = knots[1:-1] & prob.conc
            if free.any():
                dp = _second_diff(p)
                cand = free & (dp > block_eps)
                if cand.any():
                    idx = np.flatnonzero(cand)
                    steps = -_second_diff(theta)[idx] / dp[idx]
                    steps = np.maximum(steps, 0.0)
                    jmin = int(np.argmin(steps))
                    if steps[jmin] < alpha:
                        alpha, block = float(steps[jmin]), ("conc", int(idx[jmin]))
        if prob.A.shape[0]:
            outside = ~extras
            ap = prob.A @ p
            cand = outside & (ap > block_eps * prob.a_norm)
            if cand.any():
                idx = np.flatnonzero(cand)
                steps = np.maximum((prob.b[idx] - prob.A[idx] @ theta) / ap[idx], 0.0)
                jmin = int(np.argmin(steps))
                if steps[jmin] < alpha:
                    alpha, block = float(steps[jmin]), ("extra", int(idx[jmin]))

        if block is not None:
            theta = theta + alpha * p
            kind, j = block
            if kind == "conc":
                knots[j + 1] = False
            else:
                extras[j] = True
            continue

        theta = theta_eq
        ws = WorkingSet(theta, knots, extras)
        # most negative scaled multiplier among working-set rows
        worst, drop = -drop_tol, None
        nu = np.zeros(prob.A.shape[0])
        nu[extras] = nu_w
        r = y - theta
        if nu.size:
            r = r - prob.A.T @ nu
        if has_conc:
            working = prob.conc & ~knots[1:-1]
            if working.any():
                mu_hat = _conc_multipliers(r) / prob.h_norm
                idx = np.flatnonzero(working)
                j = int(np.argmin(mu_hat[idx]))
                if mu_hat[idx[j]] < worst:
                    worst, drop = mu_hat[idx[j]], ("conc", int(idx[j]))
        if extras.any():
            idx = np.flatnonzero(extras)
            nu_hat = nu[idx] * prob.a_norm[idx]
            j = int(np.argmin(nu_hat))
            if nu_hat[j] < worst:
                worst, drop = nu_hat[j], ("extra", int(idx[j]))
        if drop is None:
            res, duals = _kkt(prob, y, theta, ws, nu_w)
            return theta, duals, res, it, ws
        kind, j = drop
        if kind == "conc":
            knots[j + 1] = True
        else:
            extras[j] = False
    res, _ = _kkt(prob, y, theta, WorkingSet(theta, knots, extras), np.zeros(int(extras.sum())))
    raise SolverError(f"active-set solver hit its cap of {max_iter} pivots",
                      best=theta, residual=res, iterations=max_iter)


def _problem(n, cone):
    return _problem_cached(n, cone)


@lru_cache(maxsize=256)
def _problem_cached(n, cone):
    return _Problem(n, cone)


def project(y, cone=None, tol=DEFAULT_TOL, warm=None, max_iter=None):
    """Euclidean projection of ``y`` onto ``cone``.

    Parameters
    ----------
    y : array_like, shape (n,)
        Point to project.
    cone : ConeSpec, optional
        Target set; defaults to the full concave cone.
    tol : float
        Bound on the scaled KKT residual of the returned point.
    warm : WorkingSet, optional
        State from an earlier projection onto the same cone and length; it
        only changes the starting point, never the answer.
    max_iter : int, optional
        Pivot cap, default ``10 * n``.

    Returns
    -------
    ProjectionResult

    Raises
    ------
    SolverError
        If the pivot cap is reached or the final KKT residual exceeds ``tol``.
    """
    cone = cone or ConeSpec.full_concave()
    y = as_sequence(y)
    n = y.size
    cone.check_length(n)
    if cone.kind is ConeKind.THREE_BLOCK and cone.m1 is None:
        raise DomainError("projection onto a union of three-block sets is not defined; "
                          "fix the breakpoints")
    if cone.kind is ConeKind.ORTHO_AFFINE:
        return project_ortho_affine(y, tol=tol, warm=warm, max_iter=max_iter)
    if not tol > 0:
        raise DomainError("tol must be positive")
    prob = _problem(n, cone)
    start = warm if warm is not None and warm.point.size == n else prob.initial()
    if max_iter is None:
        max_iter = max(10 * n, 20)
    theta, duals, res, iters, ws = _active_set(prob, y, tol, max_iter, start)
    if res > tol:
        raise SolverError(f"KKT residual {res:.3g} above tolerance {tol:.3g}",
                          best=theta, residual=res, iterations=iters)
    return ProjectionResult(theta, duals, res, iters, ws)


def project_ortho_affine(y, tol=DEFAULT_TOL, warm=None, max_iter=None):
    """Projection onto the concave sequences orthogonal to all affine sequences.

    Uses ``Pi_{K cap L-perp}(y) = Pi_K(y) - P_L(y)``, which holds because the
    affine sequences form the lineality space of the concave cone.
    """
    y = as_sequence(y)
    full = project(y, ConeSpec.full_concave(), tol=tol, warm=warm, max_iter=max_iter)
    point = full.point - project_affine(y)
    return ProjectionResult(point, full.duals, full.kkt_residual, full.iterations,
                            full.working_set)


def kkt_residual(y, point, cone=None):
    """Recompute a scaled KKT residual for ``point`` as a projection of ``y``.

    Independent of the solver's bookkeeping: multipliers are re-derived by a
    non-negative least-squares fit of the residual ``y - point`` on the rows
    active at ``point``, so degenerate active sets are handled.
    """
    cone = cone or ConeSpec.full_concave()
    y, point = as_sequence(y), as_sequence(point)
    n = y.size
    scale = max(1.0, float(np.max(np.abs(y))))
    prob = _problem(n, cone)
    rows, rhs = [], []
    for j in np.flatnonzero(prob.conc):
        a = np.zeros(n)
        a[j:j + 3] = (1.0, -2.0, 1.0)
        rows.append(a)
        rhs.append(0.0)
    rows.extend(prob.A)
    rhs.extend(prob.b)
    M = np.array(rows).reshape(-1, n)
    c = np.array(rhs)
    r = y - point
    if M.shape[0] == 0:
        return float(np.max(np.abs(r))) / scale
    norms = np.linalg.norm(M, axis=1)
    slack = (M @ point - c) / norms
    primal = float(np.max(slack, initial=0.0))
    act = slack >= -1e-9 * scale
    stat = float(np.max(np.abs(r)))
    if act.any():
        lam, _ = nnls(M[act].T, r, maxiter=50 * n)
        stat = float(np.max(np.abs(M[act].T @ lam - r)))
    return max(primal, stat) / scale


class BallSolution(NamedTuple):
    value: float
    argmax: Optional[np.ndarray]
    certificate: float


class BallPath:
    """Lagrangian path for maximising ``<z, theta - center>`` over a cone and a ball.

    For ``u = 1/lambda >= 0`` the maximiser of the Lagrangian
    ``<z, theta> - |theta - center|^2 / (2u)`` over the cone is
    ``theta(u) = Pi(center + u z)``, and ``|theta(u) - center|`` is
    non-decreasing in u.  Because the projection is piecewise affine, once two
    bracketing values of u share a final working set the radius equation is a
    quadratic solved exactly.  Evaluated points are cached, so solving for
    many radii with the same ``z`` reuses the explored path.
    """

    def __init__(self, z, center, cone=None, proj_tol=DEFAULT_TOL, warm=None):
        self.z = as_sequence(z)
        self.center = as_sequence(center)
        if self.z.size != self.center.size:
            raise DomainError("z and center lengths differ")
        self.cone = cone or ConeSpec.full_concave()
        self.proj_tol = proj_tol
        self.warm = warm
        self.znorm = float(np.linalg.norm(self.z))
        self._us = []       # sorted u values
        self._pts = {}      # u -> (ProjectionResult, distance)
        self.center_feasible = is_member(self.center, self.cone,
                                         tol=1e-9 * max(1.0, float(np.max(np.abs(self.center)))))

    def evaluate(self, u):
        u = float(u)
        if u in self._pts:
            return self._pts[u]
        warm = self.warm
        if self._us:
            i = int(np.searchsorted(self._us, u))
            near = self._us[min(i, len(self._us) - 1)]
            warm = self._pts[near][0].working_set
        res = project(self.center + u * self.z, self.cone, tol=self.proj_tol, warm=warm)
        dist = float(np.linalg.norm(res.point - self.center))
        self._pts[u] = (res, dist)
        self._us.insert(int(np.searchsorted(self._us, u)), u)
        return res, dist

    def _bracket(self, t):
        lo = hi = None
        for u in self._us:
            d = self._pts[u][1]
            if d <= t:
                lo = u
            elif hi is None:
                hi = u
        return lo, hi

    def _finish(self, t, u_star, tol):
        res, d = self.evaluate(u_star)
        theta = res.point
        if d > t:
            # pull back along the segment to a feasible anchor inside the ball:
            # the center itself, or its projection when the center is outside
            anchor = self.center if self.center_feasible else self.evaluate(0.0)[0].point
            e = anchor - self.center
            s = theta - anchor
            a, b, c = float(s @ s), 2.0 * float(e @ s), float(e @ e) - t * t
            alpha = (-b + np.sqrt(max(b * b - 4.0 * a * c, 0.0))) / (2.0 * a) if a > 0 else 0.0
            theta = anchor + min(max(alpha, 0.0), 1.0) * s
        value = float(self.z @ (theta - self.center))
        if u_star > 0:
            lam = 1.0 / u_star
            upper = float(self.z @ (res.point - self.center)) - 0.5 * lam * (d * d - t * t)
        else:
            upper = value
        if self.center_feasible and value < 0.0:
            value, theta = 0.0, self.center.copy()
        cert = max(0.0, upper - value)
        if cert > tol * (abs(value) + 1.0):
            raise SolverError(f"ball maximisation gap {cert:.3g} above tolerance",
                              best=theta, residual=cert)
        return BallSolution(value, theta, cert)

    def solve(self, t, tol=1e-6, max_steps=200):
        """Supremum over ``{theta in cone : |theta - center| <= t}``.

        Returns ``BallSolution(value, argmax, certificate)``; value is
        ``-inf`` and argmax None when the feasible set is empty.
        """
        t = float(t)
        if not t >= 0:
            raise DomainError(f"radius must be non-negative, got {t}")
        if t == 0.0 and self.center_feasible:
            return BallSolution(0.0, self.center.copy(), 0.0)
        res0, d0 = self.evaluate(0.0)
        if d0 > t * (1 + 1e-12) + 1e-12:
            return BallSolution(-np.inf, None, 0.0)
        if t == 0.0 or self.znorm == 0.0:
            point = res0.point
            return BallSolution(float(self.z @ (point - self.center)), point, 0.0)
        u0 = t / self.znorm
        lo, hi = self._bracket(t)
        if hi is None:
            u = max(u0, self._us[-1] * 4.0)
            while True:
                _, d = self.evaluate(u)
                if d > t:
                    break
                if u > 1e12 * u0:
                    # the ball never binds: the supremum is attained inside it
                    return self._finish(t, u, tol)
                u *= 4.0
            lo, hi = self._bracket(t)
        for _ in range(max_steps):
            r_lo, d_lo = self._pts[lo]
            r_hi, d_hi = self._pts[hi]
            if r_lo.same_face(r_hi):
                e = r_lo.point - self.center
                s = (r_hi.point - r_lo.point) / (hi - lo)
                a = float(s @ s)
                if a == 0.0:
                    return self._finish(t, lo, tol)
                b = 2.0 * float(e @ s)
                c = float(e @ e) - t * t
                disc = max(b * b - 4.0 * a * c, 0.0)
                tau = (-b + np.sqrt(disc)) / (2.0 * a)
                u_star = min(max(lo + tau, lo), hi)
                return self._finish(t, u_star, tol)
            if hi - lo <= 1e-15 * hi:
                return self._finish(t, lo, tol)
            mid = np.sqrt(lo * hi) if lo > 0 and hi > 4.0 * lo else 0.5 * (lo + hi)
            _, d = self.evaluate(mid)
            if d <= t:
                lo = mid
            else:
                hi = mid
        raise SolverError("ball maximisation bisection did not converge")

    @property
    def last_working_set(self):
        """Working set of the largest evaluated u, for warm-starting another path."""
        if not self._us:
            return self.warm
        return self._pts[self._us[-1]][0].working_set


def max_linear_over_ball(z, center, t, cone=None, tol=1e-6):
    """Maximise ``<z, theta - center>`` over cone members within distance t of center.

    Returns ``(value, argmax, certificate)`` where the certificate is a bound
    on the duality gap.  See :class:`BallPath` for the method; use it
    directly to solve for many radii with one ``z``.
    """
    return BallPath(z, center, cone).solve(t, tol=tol)
