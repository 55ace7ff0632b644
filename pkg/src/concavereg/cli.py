"""Command-line entry point: ``concavereg <command> [options]``.

Exit status: 0 success, 1 invalid input, 2 solver failure, 3 a checked
property failed (only with ``--check``).
"""

import argparse
import math
import os
import sys
import warnings

import numpy as np

from . import covering, risk, truncation, width
from .cones import ConeSpec
from .errors import (ConfigError, DomainError, FitError, NoCrossingError, ResourceError,
                     SolverError)
from .io import SCHEMAS, Table, load_config_file, parse_config, read_sequence, render
from .projection import kkt_residual, project
from .rng import stream

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3

RISK_BAND = (-0.92, -0.68)
REGRET_BAND = (-0.95, -0.65)
PATH_SLACK = 1e-6


class CheckFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_cone(text):
    """``concave``, ``mode:K``, ``three_block:M1:M2``, ``ortho_affine`` or ``bounded:B``."""
    parts = text.split(":")
    try:
        if parts == ["concave"]:
            return ConeSpec.full_concave()
        if parts == ["ortho_affine"]:
            return ConeSpec.ortho_affine()
        if parts[0] == "mode" and len(parts) == 2:
            return ConeSpec.mode_constrained(int(parts[1]))
        if parts[0] == "three_block" and len(parts) == 3:
            return ConeSpec.three_block(int(parts[1]), int(parts[2]))
        if parts[0] == "bounded" and len(parts) == 2:
            return ConeSpec.bounded_concave(float(parts[1]))
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"cone: {exc}", key="cone") from None
    raise ConfigError(f"cone: cannot parse {text!r}", key="cone")


def _note(msg):
    print(msg, file=sys.stderr)


def _require(ok, what):
    if not ok:
        raise CheckFailed(what)


# -- commands ---------------------------------------------------------------

def cmd_project(cfg):
    if cfg["input"] is None:
        raise ConfigError("input: a file of y values is required", key="input")
    y = read_sequence(cfg["input"])
    cone = parse_cone(cfg["cone"])
    res = project(y, cone, tol=cfg["tol"])
    _note(f"kkt_residual={res.kkt_residual:.3e} iterations={res.iterations}")
    if cfg["check"]:
        _require(kkt_residual(y, res.point, cone) <= cfg["tol"], "independent KKT check")
    rows = [(i + 1, float(a), float(b)) for i, (a, b) in enumerate(zip(y, res.point))]
    return Table(["index", "input", "output"], rows,
                 {"kkt_residual": res.kkt_residual, "iterations": res.iterations})


def _width_center(cfg):
    n = cfg["n"]
    x = np.linspace(0.0, 1.0, n)
    if cfg["center"] == "zero":
        return np.zeros(n)
    if cfg["center"] == "affine":
        return cfg["scale"] * x
    return cfg["scale"] * (1.0 - (2.0 * x - 1.0) ** 2)


def cmd_width(cfg):
    center = _width_center(cfg)
    cone = parse_cone(cfg["cone"])
    sigma = cfg["sigma"]
    tg = cfg["tgrid"]
    if tg == "geometric":
        tg = np.concatenate([[0.0], width.geometric_grid(0.1 * sigma, 10.0 * sigma * math.sqrt(cfg["n"]))])
    curve = width.estimate_width(center, cone, sigma, tg, cfg["reps"], cfg["seed"],
                                 workers=cfg["threads"])
    results = {}
    if cfg["fixed_point"]:
        wf = width.WidthFunction(center, cone, sigma, cfg["reps"], cfg["seed"])
        results["fixed_point"] = width.find_fixed_point(wf, sigma=sigma)
        _note(f"fixed_point={results['fixed_point']:.6g}")
    if cfg["check"]:
        s = curve.samples
        t = curve.t_grid
        scale = 1.0 + np.abs(s)
        _require(np.all(np.diff(s, axis=1) >= -PATH_SLACK * scale[:, 1:]), "pathwise monotone")
        pos = t > 0
        r = s[:, pos] / t[pos]
        _require(np.all(np.diff(r, axis=1) <= PATH_SLACK * (1.0 + np.abs(r[:, 1:]))),
                 "pathwise star-shaped")
        if t[0] == 0:
            _require(np.all(s[:, 0] == 0.0), "zero width at t = 0")
    rows = [(float(t), float(m), float(e), curve.reps, curve.seed)
            for t, m, e in zip(curve.t_grid, curve.mean, curve.stderr)]
    return Table(["t", "mean", "stderr", "reps", "seed"], rows, results)


def demo_pair(n, L, amplitude, seed):
    """A monotone concave reference and a concave tent that spills over the band."""
    rng = stream(seed, n)
    x = np.linspace(0.0, 1.0, n)
    theta_star = amplitude * L * (1.0 - (1.0 - x) ** 2) * rng.uniform(0.2, 1.0)
    k = int(rng.integers(1, n + 1))
    a, b = rng.uniform(0.5, 3.0, size=2) * amplitude * L
    d = x - x[k - 1]
    peak = theta_star[-1] + L * rng.uniform(1.2, 3.0)
    theta = peak + np.minimum(a * d, -b * d) - rng.uniform(0, amplitude * L) * d * d
    return theta_star, theta, k


def cmd_truncate(cfg):
    L = cfg["L"] if cfg["L"] is not None else truncation.default_level(cfg["sigma"])
    theta_star, theta, k = demo_pair(cfg["n"], L, cfg["amplitude"], cfg["seed"])
    res = truncation.truncate(theta, theta_star, L)
    viol = truncation.check_contractive(theta, theta_star, res)
    results = {"L": L, "mode": k, "S1_size": int(res.S1.size), "S2_size": int(res.S2.size),
               "contraction_violation": viol}
    if cfg["check"]:
        _require(viol <= 1e-12, "contractive")
        bad = truncation.check_structure(theta, theta_star, res, k=k)
        _require(not bad, "; ".join(bad))
        t = float(np.linalg.norm(theta - theta_star))
        rep = truncation.level_set_cardinalities(theta, theta_star, t, L, k=k)
        _require(rep.ok, "; ".join(rep.violations))
    rows = list(zip(theta.tolist(), theta_star.tolist(), res.truncated.tolist()))
    return Table(["theta", "theta_star", "theta_prime"], rows, results)


def cmd_cover(cfg):
    B = cfg["B"]
    cone = ConeSpec.three_block(bound=B) if cfg["three_block"] else None
    rows, ests, sandwich = [], [], True
    for n in cfg["ngrid"]:
        eps = [r * B * math.sqrt(n) for r in cfg["eps_rel"]]
        grid = sorted(set(eps) | {2.0 * e for e in eps})
        packs = {e.epsilon: e for e in covering.nested_packings(
            n, B, grid, cone=cone, budget=cfg["budget"], seed=cfg["seed"])}
        for e in eps:
            net = None
            if cone is None:
                try:
                    net = covering.interpolation_net(n, B, e)
                except ResourceError as exc:
                    _note(f"net skipped at n={n}, eps={e:.4g}: {exc}")
            if net is not None and packs[2.0 * e].packing_count > net:
                sandwich = False
            ests.append(packs[e])
            rows.append((n, B, e, packs[e].packing_count, net))
    results = {}
    try:
        eps_slope, n_slope = covering.fit_entropy_exponents(ests)
        results = {"epsilon_slope": eps_slope, "n_slope": n_slope}
    except FitError as exc:
        _note(f"no entropy fit: {exc}")
    results["sandwich"] = sandwich
    if cfg["check"]:
        _require(sandwich, "packing at 2 eps exceeds net at eps")
    return Table(["n", "B", "epsilon", "packing_count", "net_count"], rows, results)


def _signal(cfg, n):
    return risk.SignalSpec(cfg["signal"], n, scale=cfg["scale"], pieces=cfg["pieces"],
                           b=cfg["scale"])


def cmd_risk(cfg, regret=False):
    reports = risk.run_grid(_signal(cfg, cfg["ngrid"][0]), cfg["ngrid"], cfg["sigma"],
                            cfg["reps"], cfg["seed"], regret=regret, tol=cfg["tol"],
                            workers=cfg["threads"])
    results = {}
    try:
        fit = risk.fit_rate(reports, regret=regret)
        results = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
        _note(f"slope={fit.slope:.4f} r2={fit.r2:.4f}")
    except FitError as exc:
        _note(f"no rate fit: {exc}")
    results["failures"] = sum(r.failures for r in reports)
    cols = ["n", "mean_loss", "stderr", "q50", "q90", "q99"]
    rows = []
    for r in reports:
        row = [r.n, r.mean_loss, r.stderr] + [v for _, v in r.quantiles]
        if regret:
            row += [r.regret_mean, r.regret_stderr, r.offset, r.H]
        rows.append(tuple(row))
    if regret:
        cols += ["regret_mean", "regret_stderr", "offset", "H"]
    if cfg["check"]:
        _require("slope" in results, "rate fit")
        lo, hi = REGRET_BAND if regret else RISK_BAND
        _require(lo <= results["slope"] <= hi, f"slope {results['slope']:.4f} outside [{lo}, {hi}]")
        if regret:
            _require(all(r.offset > 0 for r in reports), "positive offset")
    return Table(cols, rows, results)


def cmd_audit(cfg):
    sigma = cfg["sigma"]
    rows = []
    sig = risk.SignalSpec("quadratic", cfg["n"])
    dec = risk.decomposition_audit(sig, sigma, cfg["reps"], cfg["seed"], tol=cfg["tol"])
    rows.append(("decomposition_max_residual", dec, 1e-7, dec <= 1e-7))
    m, se = risk.affine_part_chi2(cfg["n"], sigma, cfg["chi2_reps"], cfg["seed"])
    rows.append(("affine_part_mean", m, 2.0, abs(m - 2.0) <= 3.0 * se))
    rows.append(("affine_part_stderr", se, None, None))
    tail = risk.highprob_audit(risk.SignalSpec("quadratic", cfg["tail_n"]), sigma,
                               cfg["tail_reps"], cfg["x_grid"], cfg["seed"], tol=cfg["tol"],
                               workers=cfg["threads"])
    for row in tail:
        rows.append((f"tail_fraction_x={row.x:g}", row.fraction, row.prob_bound, row.holds))
    if cfg["check"]:
        failed = [r[0] for r in rows if r[3] is False]
        _require(not failed, ", ".join(failed))
    return Table(["check", "value", "limit", "pass"], rows, {})


COMMANDS = {
    "project": cmd_project,
    "width": cmd_width,
    "truncate-demo": cmd_truncate,
    "cover": cmd_cover,
    "risk": cmd_risk,
    "regret": lambda cfg: cmd_risk(cfg, regret=True),
    "audit": cmd_audit,
}


def build_parser():
    parser = _Parser(prog="concavereg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file of settings; flags override it")
        p.add_argument("--seed")
        p.add_argument("--tol")
        p.add_argument("--threads", help="worker processes (default: CPU count)")
        p.add_argument("--output", "-o", help="output file (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--check", action="store_true", default=None,
                       help="verify the command's properties; exit 3 on violation")
        for key in schema:
            p.add_argument("--" + key.replace("_", "-"), dest=key)
    return parser


def run(argv=None):
    """Run the CLI and return the exit status."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda msg, *a, **k: _note(f"warning: {msg}")
            args = build_parser().parse_args(argv)
            flags = {k: v for k, v in vars(args).items() if k != "command"}
            file_values = load_config_file(args.config) if args.config else {}
            cfg = parse_config(args.command, file_values, flags)
        if cfg["threads"] is None:
            cfg.values["threads"] = os.cpu_count() or 1
        table = COMMANDS[args.command](cfg)
        text = render(table, cfg, cfg["format"])
        if cfg["output"]:
            with open(cfg["output"], "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    except CheckFailed as exc:
        _note(f"check failed: {exc}")
        return EXIT_CHECK
    except (SolverError, ResourceError) as exc:
        _note(f"solver error: {exc}")
        return EXIT_SOLVER
    except (ConfigError, DomainError, FitError, NoCrossingError) as exc:
        _note(f"error: {exc}")
        return EXIT_INPUT


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
