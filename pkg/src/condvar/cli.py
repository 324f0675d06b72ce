"""Command-line frontend.

Configuration is a flat key-value file with dotted keys (``model.sigma0 = 1``);
``[model]``-style section headers are accepted as shorthand for the prefix.
Values are resolved in the order defaults < file < environment < flags.
Environment overrides use the prefix ``CONDVAR_`` with ``__`` for the dot,
e.g. ``CONDVAR_MODEL__N=5000``. Every run writes ``resolved_config.json``
next to its outputs.

Exit codes: 0 success, 1 configuration or input error, 2 I/O error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericOverflowError, ReplicationError
from .estimators import ESTIMATORS, EstimatorConfig, estimate
from .harness import (
    FAILURE_COLUMNS,
    EstimatorSpec,
    ExperimentSpec,
    run_consistency,
    run_failure_demo,
)
from .simulate import (
    CompoundPoisson,
    ConstantDrift,
    ConstantVol,
    ContinuousPower,
    GaussianSize,
    GeometricOU,
    JumpPower,
    MeanRevertingDrift,
    ModelSpec,
    NoJumps,
    PointMass,
    Quadratic,
    TwoPoint,
    VolScaledDrift,
    simulate_path,
)

logger = logging.getLogger("condvar")

SCHEMA_VERSION = 1
ENV_PREFIX = "CONDVAR_"

PATH_COLUMNS = ("t", "x")
JUMP_COLUMNS = ("jump_time", "jump_size")
ESTIMATE_COLUMNS = ("estimator", "value", "p", "mode", "k", "l", "sampled", "seed", "elapsed_ms")
SUMMARY_COLUMNS = (
    "estimator", "group", "n_reps", "mean", "std", "mean_oracle", "rmse", "rel_bias",
    "n_ratio", "mean_ratio", "median_ratio", "var_ratio", "n_zero_oracle",
    "median_value_over_n", "median_value_times_kdelta", "ks", "ks_oracle",
    "coverage", "n_excluded",
)
REPLICATION_COLUMNS = (
    "rep", "seed", "n_jumps", "estimator", "value", "oracle", "oracle_kind", "ratio",
    "u_n", "u_limit", "z", "z_oracle", "n", "k", "l", "method", "sampled",
)

DEFAULTS = {
    "model.n": "1000",
    "model.substeps": "1",
    "model.x0": "0",
    "model.drift": "constant",
    "model.b": "0",
    "model.drift_speed": "1",
    "model.drift_level": "0",
    "model.drift_coef": "-0.5",
    "model.vol": "constant",
    "model.sigma0": "1",
    "model.kappa": "5",
    "model.mean": "1",
    "model.vol_of_vol": "0.5",
    "model.jumps": "none",
    "model.intensity": "1",
    "model.jump_law": "point",
    "model.jump_a": "1",
    "model.jump_mean": "0",
    "model.jump_std": "1",
    "est.names": "v_hat,v_tilde,v_universal",
    "est.p": "2",
    "est.mode": "scaled",
    "est.k": "",
    "est.l": "",
    "est.budget": "0",
    "est.subset_seed": "0",
    "est.method": "auto",
    "mc.replications": "100",
    "mc.seed": "0",
    "mc.regime": "continuous",
    "mc.jobs": "1",
    "mc.rows": "true",
    "failure.n_grid": "1000,10000,100000",
    "failure.replications": "100",
    "run.seed": "0",
    "run.out": "out",
    "run.format": "csv",
    "run.input": "",
    "run.ground_truth": "true",
}

FLAG_KEYS = {
    "n": ("model.n",),
    "p": ("est.p",),
    "mode": ("est.mode",),
    "k": ("est.k",),
    "l": ("est.l",),
    "seed": ("run.seed", "mc.seed"),
    "reps": ("mc.replications", "failure.replications"),
    "out": ("run.out",),
    "format": ("run.format",),
    "input": ("run.input",),
}


# --- configuration ------------------------------------------------------------


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"))
    try:
        parser.read_string("[__root__]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            name = key if section == "__root__" else f"{section}.{key}"
            flat[name.lower()] = value.strip()
    return flat


def env_overrides(environ=None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            out[name[len(ENV_PREFIX):].lower().replace("__", ".")] = value
    return out


def resolve_config(args: argparse.Namespace, environ=None) -> dict[str, str]:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config_file(args.config))
    cfg.update(env_overrides(environ))
    for flag, keys in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            for key in keys:
                cfg[key] = str(value)
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        cfg[key.strip().lower()] = value.strip()
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    return cfg


def _num(cfg, key, kind=float):
    raw = cfg[key]
    try:
        value = kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return value


def _opt_int(cfg, key):
    return None if cfg[key] == "" else _num(cfg, key, int)


def _bool(cfg, key):
    raw = cfg[key].lower()
    if raw in ("1", "true", "yes", "on"):
        return True
    if raw in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {cfg[key]!r}")


def build_model(cfg: dict[str, str], n: int | None = None) -> ModelSpec:
    drift_kind = cfg["model.drift"]
    if drift_kind == "constant":
        drift = ConstantDrift(_num(cfg, "model.b"))
    elif drift_kind == "mean_reverting":
        drift = MeanRevertingDrift(_num(cfg, "model.drift_speed"), _num(cfg, "model.drift_level"))
    elif drift_kind == "vol_scaled":
        drift = VolScaledDrift(_num(cfg, "model.drift_coef"))
    else:
        raise ConfigError(f"model.drift: unknown preset {drift_kind!r}")

    vol_kind = cfg["model.vol"]
    if vol_kind == "constant":
        vol = ConstantVol(_num(cfg, "model.sigma0"))
    elif vol_kind in ("gou", "geometric_ou"):
        vol = GeometricOU(
            _num(cfg, "model.kappa"), _num(cfg, "model.mean"),
            _num(cfg, "model.vol_of_vol"), _num(cfg, "model.sigma0"),
        )
    else:
        raise ConfigError(f"model.vol: unknown preset {vol_kind!r}")

    jump_kind = cfg["model.jumps"]
    if jump_kind == "none":
        jumps = NoJumps()
    elif jump_kind in ("poisson", "compound_poisson"):
        law = cfg["model.jump_law"]
        if law == "point":
            size = PointMass(_num(cfg, "model.jump_a"))
        elif law == "gaussian":
            size = GaussianSize(_num(cfg, "model.jump_mean"), _num(cfg, "model.jump_std"))
        elif law == "twopoint":
            size = TwoPoint(_num(cfg, "model.jump_a"))
        else:
            raise ConfigError(f"model.jump_law: unknown law {law!r}")
        jumps = CompoundPoisson(_num(cfg, "model.intensity"), size)
    else:
        raise ConfigError(f"model.jumps: unknown preset {jump_kind!r}")

    return ModelSpec(
        drift=drift,
        vol=vol,
        jumps=jumps,
        n=_num(cfg, "model.n", int) if n is None else n,
        substeps=_num(cfg, "model.substeps", int),
        x0=_num(cfg, "model.x0"),
    )


def build_estimator_config(cfg: dict[str, str]) -> EstimatorConfig:
    return EstimatorConfig(
        p=_num(cfg, "est.p"),
        mode=cfg["est.mode"],
        k=_opt_int(cfg, "est.k"),
        l=_opt_int(cfg, "est.l"),
        subset_budget=_num(cfg, "est.budget", int),
        subset_seed=_num(cfg, "est.subset_seed", int),
        method=cfg["est.method"],
    )


def estimator_names(cfg: dict[str, str]) -> list[str]:
    names = [s.strip() for s in cfg["est.names"].split(",") if s.strip()]
    bad = [s for s in names if s not in ESTIMATORS]
    if bad or not names:
        raise ConfigError(f"est.names: unknown estimators {bad}; choose from {sorted(ESTIMATORS)}")
    return names


def build_regime(cfg: dict[str, str]):
    kind = cfg["mc.regime"]
    p = _num(cfg, "est.p")
    if kind == "continuous":
        return ContinuousPower(p)
    if kind == "jump":
        return JumpPower(p)
    if kind == "quadratic":
        return Quadratic()
    raise ConfigError(f"mc.regime: unknown regime {kind!r}")


# --- output -------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def _json_value(value):
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_table(path: Path, columns, rows, fmt: str) -> Path:
    """Write ``rows`` (dicts) as CSV (RFC 4180 quoting, LF) or JSON lines."""
    if fmt == "csv":
        path = path.with_suffix(".csv")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
        text = buf.getvalue()
    elif fmt == "jsonl":
        path = path.with_suffix(".jsonl")
        text = "".join(
            json.dumps({c: _json_value(row.get(c)) for c in columns}) + "\n" for row in rows
        )
    else:
        raise ConfigError(f"run.format must be csv or jsonl, got {fmt!r}")
    path.write_text(text, encoding="utf-8", newline="")
    return path


def write_snapshot(out: Path, command: str, cfg: dict[str, str]) -> None:
    snapshot = {"command": command, "schema_version": SCHEMA_VERSION, "config": dict(sorted(cfg.items()))}
    (out / "resolved_config.json").write_text(
        json.dumps(snapshot, indent=2) + "\n", encoding="utf-8", newline=""
    )


def _prepare_out(cfg) -> Path:
    out = Path(cfg["run.out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def read_path_csv(path: str | os.PathLike) -> np.ndarray:
    """Observations from a ``t,x`` CSV; errors name the offending line."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != list(PATH_COLUMNS):
            raise ConfigError(f"{path}: line 1: expected header 't,x'")
        values = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) < 2:
                raise ConfigError(f"{path}: line {line}: expected two columns")
            try:
                t, x = float(row[0]), float(row[1])
            except ValueError:
                raise ConfigError(f"{path}: line {line}: not a number: {row[:2]}") from None
            if not (math.isfinite(t) and math.isfinite(x)):
                raise ConfigError(f"{path}: line {line}: non-finite value")
            values.append(x)
    if len(values) < 3:
        raise ConfigError(f"{path}: need at least 3 observations, got {len(values)}")
    return np.asarray(values)


# --- commands -----------------------------------------------------------------


def cmd_simulate(cfg: dict[str, str]) -> list[Path]:
    spec = build_model(cfg)
    fmt = cfg["run.format"]
    out = _prepare_out(cfg)
    path = simulate_path(spec, _num(cfg, "run.seed", int))
    t = np.arange(path.n + 1) / path.n
    written = [write_table(out / "path", PATH_COLUMNS,
                           ({"t": ti, "x": xi} for ti, xi in zip(t, path.observations)), fmt)]
    if _bool(cfg, "run.ground_truth"):
        rows = ({"jump_time": a, "jump_size": b} for a, b in zip(path.jump_times, path.jump_sizes))
        written.append(write_table(out / "jumps", JUMP_COLUMNS, rows, fmt))
    write_snapshot(out, "simulate", cfg)
    return written


def cmd_estimate(cfg: dict[str, str]) -> list[Path]:
    names = estimator_names(cfg)
    est_cfg = build_estimator_config(cfg)
    fmt = cfg["run.format"]
    if cfg["run.input"]:
        path = read_path_csv(cfg["run.input"])
        seed = None
    else:
        seed = _num(cfg, "run.seed", int)
        path = simulate_path(build_model(cfg), seed)
    out = _prepare_out(cfg)
    rows = []
    for name in names:
        report = estimate(name, path, est_cfg)
        rows.append(
            {
                "estimator": report.estimator_name,
                "value": report.value,
                "p": report.config.p,
                "mode": report.config.mode.value,
                "k": report.config.k,
                "l": report.config.l if name == "v_universal" else None,
                "sampled": report.sampled,
                "seed": seed,
                "elapsed_ms": round(report.elapsed * 1e3, 3),
            }
        )
    written = [write_table(out / "estimates", ESTIMATE_COLUMNS, rows, fmt)]
    write_snapshot(out, "estimate", cfg)
    return written


def _experiment(cfg: dict[str, str]) -> ExperimentSpec:
    est_cfg = build_estimator_config(cfg)
    outputs = {"summary", "rows"} if _bool(cfg, "mc.rows") else {"summary"}
    return ExperimentSpec(
        model=build_model(cfg),
        estimators=tuple(EstimatorSpec(name, est_cfg) for name in estimator_names(cfg)),
        regime=build_regime(cfg),
        replications=_num(cfg, "mc.replications", int),
        master_seed=_num(cfg, "mc.seed", int),
        outputs=outputs,
        n_jobs=_num(cfg, "mc.jobs", int),
    )


def cmd_mc(cfg: dict[str, str]) -> list[Path]:
    spec = _experiment(cfg)
    fmt = cfg["run.format"]
    out = _prepare_out(cfg)
    summary = run_consistency(spec)
    written = [write_table(out / "summary", SUMMARY_COLUMNS, summary.rows, fmt)]
    if summary.replications is not None:
        written.append(write_table(out / "replications", REPLICATION_COLUMNS, summary.replications, fmt))
    write_snapshot(out, "mc", cfg)
    return written


def cmd_failure_demo(cfg: dict[str, str]) -> list[Path]:
    grid = []
    for item in cfg["failure.n_grid"].split(","):
        try:
            grid.append(int(item))
        except ValueError:
            raise ConfigError(f"failure.n_grid: not an integer: {item!r}") from None
    model = build_model(cfg, n=grid[0])
    fmt = cfg["run.format"]
    out = _prepare_out(cfg)
    table = run_failure_demo(
        model,
        n_grid=grid,
        replications=_num(cfg, "failure.replications", int),
        master_seed=_num(cfg, "mc.seed", int),
        n_jobs=_num(cfg, "mc.jobs", int),
    )
    written = [write_table(out / "failure", FAILURE_COLUMNS, table, fmt)]
    write_snapshot(out, "failure-demo", cfg)
    return written


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "mc": cmd_mc,
    "failure-demo": cmd_failure_demo,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="key-value configuration file")
    common.add_argument("--n", type=int, help="observation intervals on [0, 1]")
    common.add_argument("--p", type=float, help="power")
    common.add_argument("--mode", choices=("scaled", "unscaled"))
    common.add_argument("--k", type=int, help="window length")
    common.add_argument("--l", type=int, help="subset size of the universal estimator")
    common.add_argument("--seed", type=int, help="path seed (simulate/estimate) or master seed (mc)")
    common.add_argument("--reps", type=int, help="Monte Carlo replications")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "jsonl"))
    common.add_argument("--input", help="observations CSV with header t,x (estimate)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="condvar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate one path")
    sub.add_parser("estimate", parents=[common], help="evaluate estimators on one path")
    sub.add_parser("mc", parents=[common], help="Monte Carlo consistency summary")
    sub.add_parser("failure-demo", parents=[common], help="divergence of the baselines under jumps")
    return parser


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for I/O here
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args, environ)
        written = COMMANDS[args.command](cfg)
    except ReplicationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3 if isinstance(exc.cause, (NumericOverflowError, ArithmeticError)) else 1
    except NumericOverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        logger.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
