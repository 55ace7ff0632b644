"""Run configuration and table serialization.

A configuration is a flat mapping of keys to values.  Each command has a
schema of known keys with defaults and validators; unknown keys and bad
values raise ConfigError naming the key.  Tables are written as CSV with
``#`` provenance comments, or as JSON with a ``metadata`` object.
"""

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import ConfigError
from .rng import check_seed

FLOAT_FORMAT = ".17g"

# keys that change how a run executes but never what it computes
EXECUTION_KEYS = ("threads", "output", "format", "check", "config")


# -- grid syntax ------------------------------------------------------------

def parse_grid(text, key, integer=False):
    """Parse ``"start:stop:xF"`` (geometric) or ``"a,b,c"`` (explicit) grids.

    A geometric grid runs from start multiplying by F while not exceeding
    stop (with a relative slack of 1e-9).  Explicit grids that are not
    geometric are accepted with a warning.
    """
    if isinstance(text, (list, tuple)):
        values = [float(v) for v in text]
    else:
        text = str(text).strip()
        try:
            if ":" in text:
                start, stop, factor = text.split(":")
                if not factor.startswith("x"):
                    raise ValueError
                start, stop, f = float(start), float(stop), float(factor[1:])
                if not (start > 0 and stop >= start and f > 1):
                    raise ValueError
                values = []
                v = start
                while v <= stop * (1 + 1e-9):
                    values.append(v)
                    v *= f
            else:
                values = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"{key}: expected 'start:stop:xFactor' or a comma list, got {text!r}",
                              key=key) from None
    if not values or any(not math.isfinite(v) for v in values):
        raise ConfigError(f"{key}: empty or non-finite grid", key=key)
    if integer:
        if any(v != round(v) for v in values):
            raise ConfigError(f"{key}: grid entries must be integers", key=key)
        values = [int(round(v)) for v in values]
    positive = [v for v in values if v > 0]
    if len(positive) > 2:
        ratios = np.diff(np.log(positive))
        if np.ptp(ratios) > 1e-6:
            warnings.warn(f"{key}: grid is not geometric", stacklevel=2)
    return values


# -- schema -----------------------------------------------------------------

def _pos_int(key, v):
    try:
        iv = int(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {v!r}", key=key) from None
    if iv != float(v) or iv < 1:
        raise ConfigError(f"{key}: must be a positive integer, got {v!r}", key=key)
    return iv


def _real(key, v, lo=None, strict=True):
    try:
        fv = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {v!r}", key=key) from None
    if not math.isfinite(fv):
        raise ConfigError(f"{key}: must be finite", key=key)
    if lo is not None and (fv <= lo if strict else fv < lo):
        raise ConfigError(f"{key}: must be {'>' if strict else '>='} {lo}, got {fv}", key=key)
    return fv


def _choice(options):
    def check(key, v):
        if v not in options:
            raise ConfigError(f"{key}: expected one of {sorted(options)}, got {v!r}", key=key)
        return v
    return check


def _seed(key, v):
    try:
        return check_seed(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}", key=key) from None


def _positive(key, v):
    return _real(key, v, 0.0)


def _nonneg(key, v):
    return _real(key, v, 0.0, strict=False)


def _tol(key, v):
    return _real(key, v, 0.0)


def _str(key, v):
    return str(v)


def _bool(key, v):
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes"):
        return True
    if str(v).lower() in ("0", "false", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {v!r}", key=key)


def _ngrid(key, v):
    vals = parse_grid(v, key, integer=True)
    if any(n < 3 for n in vals):
        raise ConfigError(f"{key}: every n must be >= 3", key=key)
    return vals


def _pos_grid(key, v):
    vals = parse_grid(v, key)
    if any(x <= 0 for x in vals):
        raise ConfigError(f"{key}: entries must be positive", key=key)
    return vals


def _tgrid(key, v):
    if v == "geometric":
        return v
    vals = parse_grid(v, key)
    if any(x < 0 for x in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"{key}: must be non-negative and increasing", key=key)
    return vals


def _threads(key, v):
    return _pos_int(key, v)


_COMMON = {
    "seed": (_seed, None),
    "tol": (_tol, 1e-8),
    "threads": (_threads, None),
    "output": (_str, None),
    "format": (_choice({"csv", "json"}), "csv"),
    "check": (_bool, False),
}

SIGNALS = {"affine", "quadratic", "piecewise", "convex"}

SCHEMAS = {
    "project": {
        "input": (_str, None),
        "cone": (_str, "concave"),
    },
    "width": {
        "center": (_choice({"zero", "quadratic", "affine"}), "zero"),
        "n": (_pos_int, 128),
        "sigma": (_positive, 1.0),
        "tgrid": (_tgrid, "geometric"),
        "reps": (_pos_int, 400),
        "cone": (_str, "concave"),
        "fixed_point": (_bool, True),
        "scale": (_nonneg, 1.0),
    },
    "truncate-demo": {
        "n": (_pos_int, 64),
        "sigma": (_positive, 1.0),
        "L": (_positive, None),
        "amplitude": (_positive, 4.0),
    },
    "cover": {
        "ngrid": (_ngrid, [6, 12, 24]),
        "B": (_positive, 1.0),
        "eps_rel": (_pos_grid, "0.02:0.5:x1.9"),
        "budget": (_pos_int, 20000),
        "three_block": (_bool, False),
    },
    "risk": {
        "signal": (_choice(SIGNALS), "quadratic"),
        "ngrid": (_ngrid, "64:4096:x2"),
        "sigma": (_nonneg, 1.0),
        "reps": (_pos_int, 200),
        "scale": (_nonneg, 1.0),
        "pieces": (_pos_int, 3),
    },
    "regret": {
        "signal": (_choice(SIGNALS), "convex"),
        "ngrid": (_ngrid, "64:4096:x2"),
        "sigma": (_nonneg, 1.0),
        "reps": (_pos_int, 200),
        "scale": (_nonneg, 1.0),
        "pieces": (_pos_int, 3),
    },
    "audit": {
        "n": (_pos_int, 200),
        "sigma": (_positive, 1.0),
        "reps": (_pos_int, 500),
        "chi2_reps": (_pos_int, 10000),
        "x_grid": (_pos_grid, "1,2,4"),
        "tail_n": (_pos_int, 512),
        "tail_reps": (_pos_int, 400),
    },
}

CLAIMS = {
    "project": "least-squares projection onto a concave cone with KKT certificate",
    "width": "localized Gaussian width and its fixed-point radius",
    "truncate-demo": "band clamping of a concave sequence around a monotone reference",
    "cover": "metric entropy of bounded concave sequences, n^(1/4) (B/eps)^(1/2) scaling",
    "risk": "risk of the concave LSE decays like n^(-4/5)",
    "regret": "regret of the concave LSE under misspecification decays like n^(-4/5)",
    "audit": "orthogonal loss decomposition, chi-square affine part, high-probability bound",
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def effective(self):
        """Resolved settings that determine the output, in sorted key order."""
        return {k: self.values[k] for k in sorted(self.values) if k not in EXECUTION_KEYS}


def load_config_file(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}", key="config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON: {exc}", key="config") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object", key="config")
    return data


def parse_config(command, file_values=None, flag_values=None):
    """Merge file and flag settings (flags win), validate, apply defaults.

    Unknown keys raise ConfigError; a seed is always required.
    """
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}", key="command")
    schema = dict(_COMMON, **SCHEMAS[command])
    raw = {}
    for source in (file_values or {}, flag_values or {}):
        for key, value in source.items():
            key = key.replace("-", "_")
            if key == "config":
                continue
            if key not in schema:
                raise ConfigError(f"{key}: unknown key for '{command}'", key=key)
            if value is not None:
                raw[key] = value
    values = {}
    for key, (check, default) in schema.items():
        if key in raw:
            values[key] = check(key, raw[key])
        elif key == "seed" and command != "project":
            raise ConfigError("seed: a seed is required", key="seed")
        else:
            values[key] = None if default is None else check(key, default)
    return RunConfig(command, values)


# -- tables -----------------------------------------------------------------

def fmt(v):
    """Deterministic text for a table cell; floats get 17 significant digits."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, FLOAT_FORMAT)
    return str(v)


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else fmt(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


@dataclass
class Table:
    columns: list
    rows: list
    results: dict


def render(table, config, fmt_name="csv"):
    """Serialize a table with provenance metadata to a string."""
    meta = {
        "tool": f"concavereg {__version__}",
        "command": config.command,
        "claim": CLAIMS[config.command],
        "seed": config.values.get("seed"),
        "config": _json_value(config.effective()),
    }
    if fmt_name == "json":
        doc = {"metadata": meta, "results": _json_value(table.results),
               "columns": list(table.columns),
               "rows": [[_json_value(v) for v in row] for row in table.rows]}
        return json.dumps(doc, indent=1, sort_keys=False, allow_nan=False) + "\n"
    lines = [f"# tool: {meta['tool']}",
             f"# command: {meta['command']}",
             f"# claim: {meta['claim']}",
             f"# seed: {meta['seed']}",
             "# config: " + json.dumps(meta["config"], sort_keys=True, allow_nan=False)]
    for key, value in table.results.items():
        lines.append(f"# result: {key}={fmt(value)}")
    lines.append(",".join(table.columns))
    lines.extend(",".join(fmt(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


def read_sequence(path):
    """Read numbers from a text or CSV file: one per line, or the last column.

    Blank lines, ``#`` comments and a non-numeric header line are skipped.
    """
    values = []
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"input: cannot read {path}: {exc}", key="input") from None
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cell = line.split(",")[-1].strip()
        try:
            values.append(float(cell))
        except ValueError:
            if values:
                raise ConfigError(f"input: line {lineno} is not numeric: {line!r}", key="input") from None
    if not values:
        raise ConfigError(f"input: no numbers in {path}", key="input")
    return np.array(values)
