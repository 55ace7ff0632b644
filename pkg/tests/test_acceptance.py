"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into an "acceptance criteria" section at the
end of the pytest run.
"""

import math

import numpy as np

from concavereg import ConeSpec, kkt_residual, project
from concavereg import covering, risk, truncation, width
from concavereg.cli import run
from concavereg.projection import BallPath
from concavereg.rng import stream
from oracles import (brute_force_projection, constraint_rows, random_concave,
                     random_monotone_concave)


def test_c01_projection_matches_enumeration(verdict):
    rng = stream(101)
    worst_err = worst_kkt = worst_indep = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 9))
        y = rng.normal(size=n) * rng.choice([0.1, 1.0, 10.0])
        res = project(y)
        A, b = constraint_rows(n)
        ref = brute_force_projection(y, A, b)
        worst_err = max(worst_err, float(np.max(np.abs(res.point - ref))))
        worst_kkt = max(worst_kkt, res.kkt_residual)
        worst_indep = max(worst_indep, kkt_residual(y, res.point))
    ok = worst_err <= 1e-8 and worst_kkt <= 1e-8 and worst_indep <= 1e-8
    verdict(1, "projection vs active-subset enumeration", ok,
            f"max Linf error {worst_err:.2e}, max KKT {worst_kkt:.2e}, "
            f"independent KKT {worst_indep:.2e} (limit 1e-8)")


def test_c02_decomposition_identity(verdict):
    sig = risk.SignalSpec("quadratic", 200)
    worst = risk.decomposition_audit(sig, sigma=1.0, reps=500, seed=202)
    verdict(2, "orthogonal loss decomposition", worst <= 1e-7,
            f"max relative residual {worst:.2e} over 500 reps at n=200 (limit 1e-7)")


def test_c03_affine_part_chi_square(verdict):
    mean, se = risk.affine_part_chi2(200, sigma=1.0, reps=10000, seed=303)
    ok = abs(mean - 2.0) <= 3.0 * se
    verdict(3, "affine part is chi-square(2)", ok,
            f"mean {mean:.4f}, stderr {se:.4f}, |mean-2| = {abs(mean - 2):.4f} (limit 3 se)")


def test_c04_risk_rate(verdict):
    reports = risk.run_grid(risk.SignalSpec("quadratic", 64), risk.DEFAULT_NGRID,
                            sigma=1.0, reps=200, seed=404)
    fit = risk.fit_rate(reports)
    ok = -0.92 <= fit.slope <= -0.68
    verdict(4, "risk rate for a quadratic concave truth", ok,
            f"weighted log-log slope {fit.slope:.4f} (band [-0.92, -0.68]), r2 {fit.r2:.4f}")


def test_c05_regret_rate(verdict):
    reports = risk.run_grid(risk.SignalSpec("convex", 64), risk.DEFAULT_NGRID,
                            sigma=1.0, reps=200, seed=505, regret=True)
    fit = risk.fit_rate(reports, regret=True)
    offsets_ok = all(r.offset > 0 for r in reports)
    ok = offsets_ok and -0.95 <= fit.slope <= -0.65
    verdict(5, "misspecified regret rate", ok,
            f"regret slope {fit.slope:.4f} (band [-0.95, -0.65]), offsets positive: {offsets_ok}, "
            f"offset at n=4096 {reports[-1].offset:.4f}, H {reports[-1].H:.1e}")


def test_c06_width_paths(verdict):
    worst_mono = worst_star = 0.0
    zero_ok = True
    for n in (32, 128):
        x = np.linspace(0.0, 1.0, n)
        for center in (np.zeros(n), 1.0 - (2.0 * x - 1.0) ** 2):
            t = np.concatenate([[0.0], width.geometric_grid(0.1, 10.0 * math.sqrt(n))])
            s = width.width_samples(center, ConeSpec.full_concave(), 1.0, t, reps=200, seed=606)
            zero_ok &= bool(np.all(s[:, 0] == 0.0))
            worst_mono = max(worst_mono, float(np.max(-np.diff(s, axis=1))))
            r = s[:, 1:] / t[1:]
            worst_star = max(worst_star, float(np.max(np.diff(r, axis=1))))
    ok = zero_ok and worst_mono <= 1e-6 and worst_star <= 1e-6
    verdict(6, "pathwise monotone and star-shaped width", ok,
            f"largest decrease {worst_mono:.2e}, largest increase of sup/t {worst_star:.2e} "
            f"(slack 1e-6), f(0)=0 exactly: {zero_ok}")


def test_c07_fixed_point_scaling(verdict):
    ns = [32, 64, 128, 256, 512]
    s = []
    for n in ns:
        wf = width.WidthFunction(np.zeros(n), reps=400, seed=707)
        s.append(width.find_fixed_point(wf, rel_tol=1e-3))
    slope = float(np.polyfit(np.log(ns), np.log(s), 1)[0])
    ok = 0.1 <= slope <= 0.3
    verdict(7, "fixed-point radius scaling at a zero truth", ok,
            f"slope of log s on log n {slope:.4f} (band [0.1, 0.3]); "
            f"s = {', '.join(f'{v:.3f}' for v in s)}")


def _fuzz_case(rng):
    n = int(rng.integers(3, 40))
    scale = float(rng.choice([0.1, 1.0, 10.0]))
    theta_star = random_monotone_concave(rng, n, scale)
    if rng.random() < 0.5:
        theta_star = theta_star[::-1].copy()
    k = int(rng.integers(1, n + 1))
    theta = random_concave(rng, n, scale * rng.uniform(0.5, 20.0), k=k)
    L = scale * float(rng.uniform(0.05, 3.0))
    return theta_star, theta, L


def test_c08_truncation_fuzz(verdict):
    rng = stream(808)
    violations = []
    for case in range(10000):
        theta_star, theta, L = _fuzz_case(rng)
        k = int(np.argmax(theta)) + 1
        res = truncation.truncate(theta, theta_star, L)
        problems = []
        if truncation.check_contractive(theta, theta_star, res) > 1e-12:
            problems.append("contractive")
        problems += truncation.check_structure(theta, theta_star, res, k=k)
        t = float(np.linalg.norm(theta - theta_star))
        problems += truncation.level_set_cardinalities(theta, theta_star, t, L, k=k).violations
        if problems:
            violations.append((case, problems))
    verdict(8, "truncation properties on 10^4 fuzzed cases", not violations,
            f"{len(violations)} violating cases" + (f", first {violations[0]}" if violations else ""))


def test_c09_entropy_scaling(verdict):
    B = 1.0
    rel = np.geomspace(0.02, 0.5, 6)
    ests, sandwich_bad, excess_bad = [], [], []
    for n in (6, 12, 24):
        eps = list(rel * B * math.sqrt(n))
        grid = sorted(set(eps) | {2.0 * e for e in eps})
        packs = {e.epsilon: e for e in covering.nested_packings(n, B, grid, seed=909)}
        three = covering.nested_packings(n, B, eps, cone=ConeSpec.three_block(bound=B), seed=909)
        limit = 2.0 * math.log(n + 2) + 1.0
        for e, tb in zip(eps, three):
            net = covering.interpolation_net(n, B, e)
            if packs[2.0 * e].packing_count > net:
                sandwich_bad.append((n, e))
            excess = tb.log_packing - packs[e].log_packing
            if excess > limit:
                excess_bad.append((n, e, excess))
            ests.append(packs[e])
    eps_slope, _ = covering.fit_entropy_exponents(ests)
    ok = 0.3 <= eps_slope <= 0.7 and not sandwich_bad and not excess_bad
    verdict(9, "metric entropy scaling", ok,
            f"epsilon slope {eps_slope:.4f} (band [0.3, 0.7]), sandwich violations "
            f"{len(sandwich_bad)}, three-block excess violations {len(excess_bad)}")


def test_c10_appendix_properties(verdict):
    bad = []
    for n in (10, 100, 1000):
        for a in (0.5, 1.0, 2.0):
            chk = width.check_subgaussian_max(n, a, reps=4000, seed=1010)
            if not chk.holds:
                bad.append((n, a, chk.mean, chk.bound))
    rng = stream(1011)
    tol = 1e-6
    n = 32
    x = np.linspace(0.0, 1.0, n)
    centers = [np.zeros(n), 1.0 - (2.0 * x - 1.0) ** 2]
    worst = -math.inf
    for i in range(1000):
        center = centers[i % 2]
        t = float(rng.uniform(0.05, 5.0))
        z = rng.normal(size=n)
        dz = rng.normal(size=n) * float(rng.choice([1e-3, 1e-1, 1.0]))
        v1 = BallPath(z, center).solve(t, tol=tol).value
        v2 = BallPath(z + dz, center).solve(t, tol=tol).value
        worst = max(worst, abs(v1 - v2) - t * float(np.linalg.norm(dz)))
    ok = not bad and worst <= 2 * tol
    verdict(10, "sub-Gaussian maximum and Lipschitz width", ok,
            f"maximal-inequality failures {bad}, Lipschitz excess max {worst:.2e} (slack {2 * tol:g})")


COMMANDS = [
    ["risk", "--signal", "quadratic", "--ngrid", "32:128:x2", "--reps", "12", "--seed", "11"],
    ["regret", "--ngrid", "32:128:x2", "--reps", "12", "--seed", "11"],
    ["width", "--n", "24", "--reps", "10", "--seed", "11", "--center", "quadratic"],
    ["cover", "--ngrid", "6", "--eps-rel", "0.1:0.5:x2", "--budget", "600", "--seed", "11"],
    ["truncate-demo", "--n", "20", "--L", "1", "--seed", "11"],
    ["audit", "--n", "40", "--reps", "20", "--chi2-reps", "200", "--tail-n", "64",
     "--tail-reps", "40", "--seed", "11"],
]


def test_c11_determinism(verdict, tmp_path):
    mismatched = []
    for args in COMMANDS:
        for fmt in ("csv", "json"):
            blobs = []
            for i, threads in enumerate(("1", "1", "2")):
                path = tmp_path / f"{args[0]}-{fmt}-{i}"
                code = run(args + ["--threads", threads, "--format", fmt, "--output", str(path)])
                assert code == 0
                blobs.append(path.read_bytes())
            if len(set(blobs)) != 1:
                mismatched.append((args[0], fmt))
    verdict(11, "byte-identical reruns across thread counts", not mismatched,
            f"{len(COMMANDS)} commands x 2 formats x 3 runs, mismatches {mismatched}")
