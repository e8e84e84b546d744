"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import yaml

from .alpha_tests import ALL_METHODS, Method, TestConfig, run_tests
from .data import emit_tables, load_panel, rolling_pvalues
from .errors import DataError, NumericalError
from .simulation import RejectionTable, ScenarioSpec, calibrate_delta_q, simulate_study

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "scenario": "I",
    "T": "60",
    "N": "100",
    "reps": 1000,
    "seed": 20240101,
    "methods": "PY,MAX,COM,SS,SM,CC",
    "gamma": 0.05,
    "s": "2,10,25",
    "delta": "0.5",
    "py_threshold": 2.0,
    "tol": 1e-6,
    "max_iter": 200,
    "delta_q": "0",
    "calibration_reps": 500,
    "beta_low": 0.5,
    "beta_high": 1.5,
    "n_jobs": 1,
    "window": 60,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(value, cast=str):
    if isinstance(value, (list, tuple)):
        return [cast(v) for v in value]
    return [cast(v.strip()) for v in str(value).split(",") if v.strip()]


def _methods(value):
    try:
        return [Method(m.upper()) for m in _csv_list(value)]
    except ValueError as exc:
        raise UsageError(f"unknown method in {value!r}") from exc


def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict) or any(isinstance(v, dict) for v in cfg.values()):
        raise UsageError("config must be a flat key-value mapping")
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _settings(args) -> dict:
    merged = dict(DEFAULTS)
    merged.update(load_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _test_config(st) -> TestConfig:
    return TestConfig(tol=float(st["tol"]), max_iter=int(st["max_iter"]), py_threshold=float(st["py_threshold"]))


def _delta_q(st, spec, config) -> tuple[float, str]:
    mode = str(st["delta_q"]).strip().lower()
    if mode in ("mean", "level"):
        return calibrate_delta_q(spec, int(st["calibration_reps"]), mode, config, int(st["n_jobs"])), mode
    try:
        return float(mode), "fixed"
    except ValueError:
        raise UsageError(f"delta_q must be a number, 'mean' or 'level', got {mode!r}") from None


def _study(st, power: bool):
    config = _test_config(st)
    methods = _methods(st["methods"])
    table = RejectionTable()
    summary = []
    grid_s = _csv_list(st["s"], int) if power else [0]
    grid_d = _csv_list(st["delta"], float) if power else [0.0]
    for scen in _csv_list(st["scenario"]):
        for T in _csv_list(st["T"], int):
            for N in _csv_list(st["N"], int):
                base = ScenarioSpec(
                    error_model=scen, T=T, N=N, gamma=float(st["gamma"]), reps=int(st["reps"]),
                    master_seed=int(st["seed"]), beta_low=float(st["beta_low"]), beta_high=float(st["beta_high"]),
                )
                dq, mode = _delta_q(st, base, config)
                cfg = replace(config, delta_q=dq)
                for s in grid_s:
                    for d in grid_d:
                        spec = replace(base, s=s, delta=d)
                        out = simulate_study(spec, methods, cfg, int(st["n_jobs"]))
                        table.rows.extend(out.table.rows)
                        table.failures += out.table.failures
                        summary.append({
                            "scenario": scen, "T": T, "N": N, "s": s, "delta": d,
                            "delta_q": dq, "delta_q_mode": mode, "failures": out.table.failures,
                            "reject_rate": {r.method: r.reject_rate for r in out.table.rows},
                        })
    return table, summary


def cmd_simulate(args, power: bool) -> int:
    st = _settings(args)
    table, summary = _study(st, power)
    if args.out:
        emit_tables(table, args.out)
    print(json.dumps({"command": args.command, "results": summary, "output": args.out}, indent=2))
    return EXIT_OK


def cmd_test(args) -> int:
    st = _settings(args)
    panel = load_panel(args.returns, args.factors)
    cfg = replace(_test_config(st), delta_q=float(st["delta_q"]))
    results = run_tests(panel, _methods(st["methods"]), cfg)
    rows = [
        {"method": m.value, "statistic": r.statistic, "p_value": r.p_value, "reject": r.p_value <= float(st["gamma"])}
        for m, r in results.items()
    ]
    if args.out:
        import csv

        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "statistic", "p_value"])
            for row in rows:
                w.writerow([row["method"], "" if row["statistic"] is None else repr(float(row["statistic"])), repr(float(row["p_value"]))])
    print(json.dumps({"command": "test", "T": panel.T, "N": panel.N, "results": rows}, indent=2))
    return EXIT_OK


def cmd_rolling(args) -> int:
    st = _settings(args)
    panel = load_panel(args.returns, args.factors)
    cfg = replace(_test_config(st), delta_q=float(st["delta_q"]))
    report = rolling_pvalues(panel, int(st["window"]), _methods(st["methods"]), cfg)
    if args.out:
        emit_tables(report, args.out)
    gammas = _csv_list(args.gammas, float)
    print(json.dumps({
        "command": "rolling",
        "window": report.window_T,
        "windows": report.n_windows,
        "failures": len(report.failures),
        "rejection_ratios": {str(g): report.rejection_ratios(g) for g in gammas},
        "output": args.out,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="robust-alpha", description="High-dimensional alpha tests for linear factor models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="flat YAML key-value file with defaults")
        p.add_argument("--methods", help="comma-separated subset of " + ",".join(m.value for m in ALL_METHODS))
        p.add_argument("--gamma", type=float)
        p.add_argument("--py-threshold", dest="py_threshold", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--delta-q", dest="delta_q", help="centring of Q: a number, or 'mean'/'level' (simulations only)")
        p.add_argument("--out", help="CSV output path")

    for name, helptext in (("simulate-size", "Monte Carlo empirical sizes"), ("simulate-power", "Monte Carlo power")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--scenario", help="error scenarios, e.g. I,II,III,IV")
        p.add_argument("--T", help="comma-separated sample sizes")
        p.add_argument("--N", help="comma-separated dimensions")
        p.add_argument("--reps", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--calibration-reps", dest="calibration_reps", type=int)
        p.add_argument("--n-jobs", dest="n_jobs", type=int)
        if name == "simulate-power":
            p.add_argument("--s", help="comma-separated sparsity levels")
            p.add_argument("--delta", help="comma-separated signal energies")

    p = sub.add_parser("test", help="run the tests once on a returns/factors CSV pair")
    common(p)
    p.add_argument("--returns", required=True)
    p.add_argument("--factors", required=True)

    p = sub.add_parser("rolling", help="p-values over rolling windows")
    common(p)
    p.add_argument("--returns", required=True)
    p.add_argument("--factors", required=True)
    p.add_argument("--window", type=int)
    p.add_argument("--gammas", default="0.01,0.05")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate-size":
            return cmd_simulate(args, power=False)
        if args.command == "simulate-power":
            return cmd_simulate(args, power=True)
        if args.command == "test":
            return cmd_test(args)
        return cmd_rolling(args)
    except UsageError as exc:
        print(f"robust-alpha: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"robust-alpha: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"robust-alpha: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"robust-alpha: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
