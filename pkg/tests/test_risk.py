import math

import numpy as np
import pytest

from concavereg import ConeSpec, DomainError, FitError, SolverError, is_member
from concavereg import risk
from concavereg.risk import SignalSpec
from oracles import constraint_rows, cvxpy_projection


def test_signal_families():
    q = SignalSpec("quadratic", 50).sequence()
    assert is_member(q, ConeSpec.full_concave())
    assert q.max() == pytest.approx(1.0, abs=1e-3)
    c = SignalSpec("convex", 50).sequence()
    assert not is_member(c, ConeSpec.full_concave())
    np.testing.assert_allclose(SignalSpec("affine", 4, a=1.0, b=3.0).sequence(), [1, 2, 3, 4])
    for k in (1, 2, 3, 5):
        p = SignalSpec("piecewise", 40, pieces=k).sequence()
        assert is_member(p, ConeSpec.full_concave())
    assert SignalSpec.custom([1.0, 2.0, 0.0]).n == 3
    with pytest.raises(DomainError):
        SignalSpec("quadratic", 2)


def test_noiseless_concave_truth_has_zero_loss():
    rep = risk.run_risk(SignalSpec("quadratic", 64), sigma=0.0, reps=3, seed=1)
    assert rep.mean_loss == pytest.approx(0.0, abs=1e-20)


def test_report_summaries():
    rep = risk.run_risk(SignalSpec("quadratic", 64), reps=50, seed=2)
    assert rep.mean_loss > 0 and rep.failures == 0
    qs = [v for _, v in rep.quantiles]
    assert qs == sorted(qs)
    assert qs[0] in rep.losses  # order statistics, no interpolation
    with pytest.raises(DomainError):
        risk.run_risk(SignalSpec("quadratic", 64), reps=1, seed=2)


def test_parallel_and_serial_agree_bitwise():
    a = risk.run_risk(SignalSpec("quadratic", 80), reps=8, seed=3, workers=1)
    b = risk.run_risk(SignalSpec("quadratic", 80), reps=8, seed=3, workers=2)
    assert a.losses.tobytes() == b.losses.tobytes()


def test_affine_truth_affine_part():
    mean, se = risk.affine_part_chi2(50, sigma=2.0, reps=4000, seed=4)
    assert abs(mean - 2.0) <= 3 * se


def test_risk_matches_generic_solver_at_n256():
    pytest.importorskip("cvxpy")
    n, reps = 256, 30
    sig = SignalSpec("quadratic", n)
    rep = risk.run_risk(sig, reps=reps, seed=5)
    A, b = constraint_rows(n)
    theta_star = sig.sequence()
    ref = []
    for r in range(reps):
        y = theta_star + risk.noise(5, n, r, 1.0)
        d = cvxpy_projection(y, A, b) - theta_star
        ref.append(d @ d / n)
    assert abs(rep.mean_loss - np.mean(ref)) <= 2 * rep.stderr
    np.testing.assert_allclose(rep.losses, ref, rtol=1e-4)


def test_regret_of_concave_truth_equals_loss():
    rep = risk.run_regret(SignalSpec("quadratic", 64), reps=20, seed=6)
    assert rep.offset == pytest.approx(0.0, abs=1e-15)
    assert rep.regret_mean == pytest.approx(rep.mean_loss, abs=1e-15)


def test_misspecified_offset():
    offset, H = risk.misspecification_offset(SignalSpec("convex", 101).sequence())
    assert offset > 0
    # the closest concave fit to a convex truth is affine
    assert H == pytest.approx(0.0, abs=1e-10)
    rep = risk.run_regret(SignalSpec("convex", 101), reps=100, seed=7)
    assert rep.regret_mean >= -2 * rep.regret_stderr


def test_fit_planted_rate():
    ns = [64, 128, 256, 512, 1024]
    fit = risk.fit_log_log(ns, [3.0 * n ** -0.8 for n in ns])
    assert fit.slope == pytest.approx(-0.8, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    fit = risk.fit_log_log(ns, [3.0 * n ** -0.8 for n in ns], [0.01 * n ** -0.8 for n in ns])
    assert fit.slope == pytest.approx(-0.8, abs=1e-12)
    with pytest.raises(FitError):
        risk.fit_log_log(ns[:3], [1.0, 0.5, 0.25])
    with pytest.raises(FitError):
        risk.fit_log_log(ns, [1.0, -0.5, 0.25, 0.1, 0.05])


def test_affine_truth_decays_fast():
    reports = risk.run_grid(SignalSpec("affine", 64, b=1.0), [64, 128, 256, 512], reps=100, seed=8)
    assert risk.fit_rate(reports).slope <= -0.85


def test_decomposition_audit():
    worst = risk.decomposition_audit(SignalSpec("quadratic", 60), reps=30, seed=9)
    assert worst <= 1e-7
    theta = SignalSpec("quadratic", 30).sequence()
    assert max(risk.decomposition_residuals(theta, np.zeros(30))) <= 1e-15
    with pytest.raises(DomainError):
        risk.decomposition_audit(SignalSpec("convex", 30), reps=2, seed=9)


def test_scale_equivariance_is_pathwise():
    base = risk.run_risk(SignalSpec("quadratic", 100, scale=1.0), sigma=1.0, reps=10, seed=10)
    big = risk.run_risk(SignalSpec("quadratic", 100, scale=3.0), sigma=3.0, reps=10, seed=10)
    np.testing.assert_allclose(big.losses, 9.0 * base.losses, rtol=1e-9)


def test_highprob_audit():
    rows = risk.highprob_audit(SignalSpec("quadratic", 512), reps=200, x_grid=(0.0, 1.0, 2.0, 4.0),
                               seed=11)
    assert rows[0].prob_bound == pytest.approx(2.0)
    assert all(r.holds for r in rows)
    assert rows[-1].fraction <= rows[1].fraction


def test_failures_abort(monkeypatch):
    def broken(*args, **kwargs):
        raise SolverError("boom")

    monkeypatch.setattr(risk, "project", broken)
    with pytest.raises(SolverError):
        risk.run_risk(SignalSpec("quadratic", 20), reps=10, seed=12)


def test_rate_term():
    assert risk.rate_term(1.0, 0.0, 1) == 1.0
    assert risk.rate_term(2.0, 2.0, 32) == pytest.approx(2 ** 1.6 * 4 ** 0.4 / 16)
    assert math.isfinite(risk.rate_term(0.5, 10.0, 4096))
