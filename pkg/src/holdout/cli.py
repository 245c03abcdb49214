"""``holdout`` command-line tool.

Subcommands::

    analyze         anchors -> curve -> optimal m and implied K per noise level
    frontier        optimal m over a noise-level grid, with the noise upper bound
    implicit-sigma  noise level under which K-fold CV would be optimal, per K
    simulate        Monte-Carlo variance experiments (split, fixed, kfold)

Every option can also come from a JSON file given with ``--config``; its keys are
the long flag names (dashes or underscores). Flags on the command line win.

Exit codes: 0 success, 1 usage/IO/input error, 2 some requested noise level is
infeasible (analyze), 3 an invariant failed under ``--check`` (simulate).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import __version__
from .curves import BoundMode, LossCurve, fit_interpolating_curve, fit_power_curve
from .cv import LossAnchors, estimate_anchors
from .dataset import load_csv
from .errors import AnchorError, DomainError, HoldoutError
from .models import PredictorSpec
from .optimizer import (
    default_sigma2_grid,
    implicit_sigma2,
    max_feasible_sigma2,
    optimal_m,
    pareto_frontier,
    sigma2_upper_bound,
)
from .reports import (
    CURVE_COLUMNS,
    FRONTIER_COLUMNS,
    curve_table,
    frontier_table,
    write_csv,
    write_json,
)
from .rng import stream
from .simulation import (
    DgpConfig,
    run_fixed_model_experiment,
    run_kfold_experiment,
    run_split_experiment,
)
from .sure import sure_anchor

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_CHECK = 0, 1, 2, 3
CONVENTIONAL_K = (4, 5, 10, 20)


class UsageError(Exception):
    pass


# --- value parsers; each returns a JSON-native value so configs round-trip ---


def _as_text(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    return str(v)


def _floats(v) -> list[float]:
    try:
        out = [float(x) for x in _as_text(v).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {v!r}")
    if not out:
        raise UsageError("empty number list")
    return out


def _ints(v) -> list[int]:
    try:
        out = [int(x) for x in _as_text(v).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {v!r}")
    if not out:
        raise UsageError("empty integer list")
    return out


def _grid(v) -> str:
    parts = _as_text(v).split(":")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if len(parts) != 3:
            raise ValueError
    except (ValueError, IndexError):
        raise UsageError(f"grid must be min:max:count, got {v!r}")
    if not (0 < lo <= hi and n >= 1) or (n > 1 and lo == hi):
        raise UsageError(f"grid needs 0 < min < max and count >= 1, got {v!r}")
    return f"{parts[0]}:{parts[1]}:{n}"


def _expand_grid(spec: str) -> list[float]:
    lo, hi, n = spec.split(":")
    return np.geomspace(float(lo), float(hi), int(n)).tolist()


def _anchors(v) -> list[float]:
    a = _floats(v)
    if len(a) != 3:
        raise UsageError(f"--anchors needs three losses l_loo,l_kref,l_lmo, got {v!r}")
    return a


def _choice(*options: str, aliases: dict | None = None) -> Callable:
    aliases = aliases or {}

    def parse(v):
        v = aliases.get(str(v), str(v))
        if v not in options:
            raise UsageError(f"expected one of {options}, got {v!r}")
        return v

    return parse


def _scalar(kind):
    def parse(v):
        try:
            return kind(v)
        except (TypeError, ValueError):
            raise UsageError(f"expected {kind.__name__}, got {v!r}")

    return parse


def _flag(v) -> bool:
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes"):
        return True
    if str(v).lower() in ("0", "false", "no"):
        return False
    raise UsageError(f"expected a boolean, got {v!r}")


@dataclass(frozen=True)
class Option:
    name: str
    parse: Callable[[Any], Any]
    help: str
    is_flag: bool = False


_O = Option
COMMON = [
    _O("seed", _scalar(int), "random seed (default 0)"),
    _O("out_json", str, "JSON report path (default <command>_report.json)"),
    _O("out_csv", str, "CSV table path (default <command>_table.csv)"),
    _O("omit_timing", _flag, "write null duration so reports are byte-identical", True),
]
CURVE = [
    _O("data", str, "CSV dataset path"),
    _O("target", str, "response column name"),
    _O("model", _choice("ols", "rf", aliases={"random_forest": "rf"}), "ols or rf"),
    _O("anchors", _anchors, "l_loo,l_kref,l_lmo (skips training; needs --n)"),
    _O("n", _scalar(int), "total sample size N for --anchors"),
    _O("k_ref", _scalar(int), "reference fold count for the middle anchor (default 5)"),
    _O("loocv_subsample", _scalar(int), "estimate LOOCV on this many held-out rows"),
    _O("fit", _choice("power", "pchip", "cubic_spline"), "curve family (default power)"),
    _O("pchip_fallback", _flag, "fall back to PCHIP when power-fit anchors are not monotone", True),
    _O("sure_sigma2", _scalar(float), "replace the LOOCV anchor with SURE at this noise level (OLS)"),
    _O("bound", _choice("symmetric", "asymmetric"), "variance-bound constant 4 or 16"),
    _O("sigma_max", _scalar(float), "heteroskedastic bound: fixed upper noise level sigma2_max"),
    _O("n_trees", _scalar(int), "forest size (default 200)"),
    _O("min_leaf", _scalar(int), "forest minimum leaf size (default 5)"),
    _O("max_depth", _scalar(int), "forest maximum depth (default unlimited)"),
    _O("mtry", _scalar(int), "features tried per split (default max(1, p // 3))"),
]
SIGMA = [
    _O("sigma2", _floats, "noise levels, comma-separated"),
    _O("sigma2_grid", _grid, "log-spaced noise grid min:max:count"),
]
K_LIST = [_O("k", _ints, "fold counts, comma-separated")]
SIMULATE = [
    _O("experiment", _choice("split", "fixed", "kfold"), "split (refit), fixed (fixed model) or kfold"),
    _O("noise", _choice("gaussian", "hetero", "gamma",
                       aliases={"heteroskedastic": "hetero", "gamma_centered": "gamma"}),
       "noise family"),
    _O("reps", _scalar(int), "Monte-Carlo repetitions"),
    _O("n_rows", _scalar(int), "rows in the simulated design (default 400)"),
    _O("n_features", _scalar(int), "features in the simulated design (default 10)"),
    _O("sigma2", _scalar(float), "noise level (default 1)"),
    _O("m_grid", _ints, "hold-out sizes for split/fixed experiments"),
    _O("k", _ints, "fold counts for the kfold experiment"),
    _O("partitions", _scalar(int), "partition redraws for the nested-CV variance"),
    _O("check", _flag, "exit 3 when a bound invariant fails beyond 3 MC standard errors", True),
]

COMMANDS: dict[str, list[Option]] = {
    "analyze": COMMON + CURVE + SIGMA,
    "frontier": COMMON + CURVE + SIGMA + K_LIST,
    "implicit-sigma": COMMON + CURVE + K_LIST,
    "simulate": COMMON + SIMULATE,
}

_CURVE_DEFAULTS = {
    "data": None, "target": None, "model": "ols", "anchors": None, "n": None, "k_ref": 5,
    "loocv_subsample": None, "fit": "power", "pchip_fallback": False, "sure_sigma2": None,
    "bound": "symmetric", "sigma_max": None, "n_trees": 200, "min_leaf": 5,
    "max_depth": None, "mtry": None,
}
_COMMON_DEFAULTS = {"seed": 0, "out_json": None, "out_csv": None, "omit_timing": False}
DEFAULTS: dict[str, dict] = {
    "analyze": {**_COMMON_DEFAULTS, **_CURVE_DEFAULTS, "sigma2": None, "sigma2_grid": None},
    "frontier": {**_COMMON_DEFAULTS, **_CURVE_DEFAULTS, "sigma2": None, "sigma2_grid": None,
                 "k": list(CONVENTIONAL_K)},
    "implicit-sigma": {**_COMMON_DEFAULTS, **_CURVE_DEFAULTS, "k": list(CONVENTIONAL_K)},
    "simulate": {**_COMMON_DEFAULTS, "experiment": "split", "noise": "gaussian", "reps": 500,
                 "n_rows": 400, "n_features": 10, "sigma2": 1.0,
                 "m_grid": [10, 20, 40, 80, 160], "k": [2, 4, 5, 8, 10, 20],
                 "partitions": 20, "check": False},
}

CSV_HELP = {
    "analyze": "CSV columns: " + ", ".join(CURVE_COLUMNS),
    "frontier": "CSV columns: " + ", ".join(FRONTIER_COLUMNS),
    "implicit-sigma": "CSV columns: K, m, implicit_sigma2, feasible",
    "simulate": (
        "CSV columns (split): m, repetitions, empirical_variance, variance_se, mean_pure_loss, "
        "bound, bound_se, ratio, ratio_se. (fixed): m, repetitions, empirical_variance, "
        "variance_se, exact_variance, mean_pure_loss, model_error, bound. (kfold): K, m, "
        "true_mc_variance (oracle loss), true_mc_variance_pure (pure loss), their SEs, "
        "mean_oracle_loss, max_fold_variance, nested_cv_variance, clt_plugin_variance, "
        "clt_plugin_mean, bound_raw_c4/c16, bound_clt_c4/c16, ratio_* (estimator or bound "
        "over true_mc_variance)."
    ),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="holdout", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"holdout {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, options in COMMANDS.items():
        p = sub.add_parser(name, epilog=CSV_HELP[name], argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file whose keys mirror the flags")
        for opt in options:
            flag = "--" + opt.name.replace("_", "-")
            if opt.is_flag:
                p.add_argument(flag, dest=opt.name, action="store_const", const=True, help=opt.help)
            else:
                p.add_argument(flag, dest=opt.name, help=opt.help)
    return parser


def resolve_config(command: str, cli_values: dict, file_values: dict | None = None) -> dict:
    """Defaults, then config-file values, then flags; every value parsed and validated."""
    options = {o.name: o for o in COMMANDS[command]}
    cfg = dict(DEFAULTS[command])
    for source in (file_values or {}, cli_values):
        for key, value in source.items():
            key = key.replace("-", "_")
            if key in ("command", "config"):
                continue
            if key not in options:
                raise UsageError(f"unknown option {key!r} for {command}")
            cfg[key] = None if value is None else options[key].parse(value)
    return cfg


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    # a saved report can be fed back: take its resolved config
    if "meta" in data and isinstance(data["meta"], dict) and "config" in data["meta"]:
        data = data["meta"]["config"]
    return data


# --- pipeline pieces ---


def _mode(cfg: dict) -> BoundMode:
    return BoundMode(cfg["bound"], cfg["sigma_max"])


def _spec(cfg: dict) -> PredictorSpec:
    if cfg["model"] == "ols":
        return PredictorSpec.ols()
    return PredictorSpec.random_forest(
        seed=cfg["seed"],
        n_trees=cfg["n_trees"],
        min_leaf_size=cfg["min_leaf"],
        max_depth=cfg["max_depth"],
        features_per_split=cfg["mtry"],
    )


def _anchors_from(cfg: dict) -> LossAnchors:
    if cfg["anchors"] is not None:
        if cfg["n"] is None:
            raise UsageError("--anchors needs --n (total sample size)")
        return LossAnchors(*cfg["anchors"], n_total=cfg["n"], k_ref=cfg["k_ref"])
    if cfg["data"] is None or cfg["target"] is None:
        raise UsageError("give --data and --target, or --anchors and --n")
    data = load_csv(cfg["data"], cfg["target"])
    spec = _spec(cfg)
    loo = None
    if cfg["sure_sigma2"] is not None:
        s2 = cfg["sure_sigma2"]
        loo = sure_anchor(spec, data, s2) + s2
    return estimate_anchors(
        spec, data, cfg["k_ref"], stream(cfg["seed"]), cfg["loocv_subsample"], loo
    )


def _curve_from(cfg: dict, anchors: LossAnchors) -> LossCurve:
    try:
        if cfg["fit"] == "power":
            return fit_power_curve(anchors, "pchip" if cfg["pchip_fallback"] else None)
        return fit_interpolating_curve(anchors.points(), cfg["fit"], anchors.n_total)
    except AnchorError as exc:
        raise AnchorError(
            f"{exc}; anchors (m, loss) = {anchors.points()}; "
            "pass --pchip-fallback or --fit pchip to continue without the power form"
        ) from None


def _sigma_values(cfg: dict) -> list[float] | None:
    values: list[float] = []
    if cfg.get("sigma2"):
        values += cfg["sigma2"]
    if cfg.get("sigma2_grid"):
        values += _expand_grid(cfg["sigma2_grid"])
    if not values:
        return None
    if any(not (math.isfinite(s) and s > 0) for s in values):
        raise UsageError("noise levels must be positive")
    return sorted(set(values))


def _upper_bound(curve: LossCurve, mode: BoundMode) -> float | None:
    try:
        return sigma2_upper_bound(curve, mode)
    except DomainError:
        return None


def _curve_section(anchors: LossAnchors, curve: LossCurve, mode: BoundMode) -> dict:
    return {
        "anchors": anchors.to_dict(),
        "curve": curve.to_dict(),
        "bound_mode": mode.to_dict(),
        "max_feasible_sigma2": max_feasible_sigma2(curve),
        "sigma2_upper_bound": _upper_bound(curve, mode),
    }


def cmd_analyze(cfg: dict) -> tuple[dict, list[dict], list[str] | None, int]:
    sigmas = _sigma_values(cfg)
    if sigmas is None:
        raise UsageError("analyze needs --sigma2 or --sigma2-grid")
    anchors = _anchors_from(cfg)
    curve = _curve_from(cfg, anchors)
    mode = _mode(cfg)
    body = _curve_section(anchors, curve, mode)
    ub = body["sigma2_upper_bound"]
    results = []
    for s in sigmas:
        d = optimal_m(curve, s, mode).to_dict()
        d["beyond_upper_bound"] = ub is None or s > ub
        results.append(d)
    body["results"] = results
    infeasible = [r["sigma2"] for r in results if not r["feasible"]]
    body["infeasible_sigma2"] = infeasible
    code = EXIT_INFEASIBLE if infeasible else EXIT_OK
    return body, curve_table(curve, sigmas, mode), list(CURVE_COLUMNS), code


def _k_annotations(curve: LossCurve, mode: BoundMode, ks, points) -> list[dict]:
    out = []
    for K in ks:
        m = curve.n_total // K if K >= 1 else None
        try:
            s = implicit_sigma2(curve, K, mode)
            err = None
        except DomainError as exc:
            s, err = None, str(exc)
        crossed = any(p.feasible and p.m_star is not None and p.m_star >= m for p in points)
        out.append({"K": K, "m": m, "crossing_sigma2": s, "crossed": crossed, "error": err})
    return out


def cmd_frontier(cfg: dict):
    anchors = _anchors_from(cfg)
    curve = _curve_from(cfg, anchors)
    mode = _mode(cfg)
    body = _curve_section(anchors, curve, mode)
    grid = _sigma_values(cfg)
    if grid is None:
        grid = default_sigma2_grid(curve, mode).tolist()
    points = pareto_frontier(curve, grid, mode, body["sigma2_upper_bound"])
    body["frontier"] = frontier_table(points)
    body["k_lines"] = _k_annotations(curve, mode, cfg["k"], points)
    return body, frontier_table(points), list(FRONTIER_COLUMNS), EXIT_OK


def cmd_implicit_sigma(cfg: dict):
    anchors = _anchors_from(cfg)
    curve = _curve_from(cfg, anchors)
    mode = _mode(cfg)
    body = _curve_section(anchors, curve, mode)
    rows = []
    for K in cfg["k"]:
        m = curve.n_total // K if K >= 1 else None
        try:
            s = implicit_sigma2(curve, K, mode)
            reason = None if s is not None else "not optimal at any feasible noise level"
        except DomainError as exc:
            s, reason = None, str(exc)
        rows.append({"K": K, "m": m, "implicit_sigma2": s, "feasible": s is not None, "reason": reason})
    body["implicit_sigma2"] = rows
    table = [{k: r[k] for k in ("K", "m", "implicit_sigma2", "feasible")} for r in rows]
    return body, table, ["K", "m", "implicit_sigma2", "feasible"], EXIT_OK


def _violations(report, experiment: str) -> list[str]:
    out = []
    if experiment == "split":
        for r in report.rows:
            if r.empirical_variance > r.bound + 3 * r.slack_se:
                out.append(f"m={r.m}: variance {r.empirical_variance:.4g} > bound {r.bound:.4g} + 3 SE")
    elif experiment == "fixed":
        for r in report.rows:
            if r.empirical_variance > r.bound + 3 * r.variance_se:
                out.append(f"m={r.m}: variance {r.empirical_variance:.4g} > bound {r.bound:.4g} + 3 SE")
    else:
        for r in report.rows:
            se = math.hypot(r.true_mc_variance_se, r.max_fold_variance_se)
            if r.true_mc_variance > r.max_fold_variance + 3 * se:
                out.append(f"K={r.K}: K-fold variance exceeds the largest fold variance + 3 SE")
            if r.bound_raw_c4 < r.true_mc_variance - 3 * r.true_mc_variance_se:
                out.append(f"K={r.K}: single-split bound below the K-fold variance")
    return out


def cmd_simulate(cfg: dict):
    noise = {"gaussian": "gaussian", "hetero": "heteroskedastic", "gamma": "gamma_centered"}
    dgp = DgpConfig(cfg["n_rows"], cfg["n_features"], None, noise[cfg["noise"]], cfg["sigma2"], cfg["seed"])
    exp = cfg["experiment"]
    if exp == "split":
        report = run_split_experiment(dgp, cfg["m_grid"], cfg["reps"])
    elif exp == "fixed":
        report = run_fixed_model_experiment(dgp, cfg["m_grid"], cfg["reps"])
    else:
        report = run_kfold_experiment(dgp, cfg["k"], cfg["reps"], cfg["partitions"])
    body = report.to_dict()
    code = EXIT_OK
    if cfg["check"]:
        bad = _violations(report, exp)
        body["check"] = {"passed": not bad, "violations": bad}
        if bad:
            code = EXIT_CHECK
    table = report.table()
    return body, table, list(table[0].keys()), code


HANDLERS = {
    "analyze": cmd_analyze,
    "frontier": cmd_frontier,
    "implicit-sigma": cmd_implicit_sigma,
    "simulate": cmd_simulate,
}


def run(command: str, cfg: dict) -> tuple[dict, int]:
    """Run one command on a resolved config and write both reports. Returns (report, code)."""
    start = time.perf_counter()
    body, table, columns, code = HANDLERS[command](cfg)
    duration = None if cfg["omit_timing"] else time.perf_counter() - start
    stem = command.replace("-", "_")
    report = {
        "meta": {
            "tool": "holdout",
            "version": __version__,
            "command": command,
            "seed": cfg["seed"],
            "duration_seconds": duration,
            "exit_code": code,
            "config": cfg,
        },
        **body,
    }
    write_json(cfg["out_json"] or f"{stem}_report.json", report)
    write_csv(cfg["out_csv"] or f"{stem}_table.csv", table, columns)
    return report, code


def _summary(command: str, report: dict) -> str:
    lines = [f"holdout {command}: exit {report['meta']['exit_code']}"]
    if "curve" in report:
        c = report["curve"]
        if c.get("exponent") is not None:
            lines.append(f"  exponent {c['exponent']:.4f}  scale {c['scale']:.4f}")
        ub = report.get("sigma2_upper_bound")
        lines.append(f"  sigma2 upper bound {ub:.4g}" if ub is not None else "  sigma2 upper bound: none")
    for r in report.get("results", []):
        if r["feasible"]:
            lines.append(f"  sigma2={r['sigma2']:g}: m*={r['m_star']}  K~{r['implied_K']:.2f}")
        else:
            lines.append(f"  sigma2={r['sigma2']:g}: infeasible")
    for r in report.get("implicit_sigma2", []):
        v = "-" if r["implicit_sigma2"] is None else f"{r['implicit_sigma2']:.4g}"
        lines.append(f"  K={r['K']}: sigma2={v}")
    if "check" in report:
        lines.append("  check: " + ("passed" if report["check"]["passed"] else "FAILED"))
        lines += [f"    {v}" for v in report["check"]["violations"]]
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    cli = build_parser()
    try:
        ns = cli.parse_args(argv)
        values = vars(ns)
        command = values.pop("command")
        file_values = _load_config_file(values["config"]) if "config" in values else None
        cfg = resolve_config(command, values, file_values)
        report, code = run(command, cfg)
    except UsageError as exc:
        print(f"holdout: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (HoldoutError, OSError) as exc:
        print(f"holdout: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(_summary(command, report))
    return code


if __name__ == "__main__":
    sys.exit(main())
