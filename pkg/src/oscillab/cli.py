"""Command-line entry point.

Subcommands: simulate, sweep, check, lp-selftest, coeff-audit.  Parallelism
for sweeps is capped by the OSCILLAB_THREADS environment variable.
"""
from __future__ import annotations

import argparse
import json
import sys

from .harness import (ConfigError, ExperimentConfig, RunReport, check_theorem,
                      coeff_audit, lp_selftest, run, sweep)


def _parse_axis(spec: str):
    if "=" not in spec:
        raise ConfigError(f"axis must look like key=v1,v2,..., got {spec!r}")
    key, _, vals = spec.partition("=")
    return key.strip(), [v.strip() for v in vals.split(",") if v.strip()]


def _axis_values(key: str, raw_values):
    from .harness import _SCHEMA
    typ = _SCHEMA[key][0]
    return [typ(v) if typ is not str else v for v in raw_values]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="oscillab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one experiment config")
    p_sim.add_argument("config")
    p_sim.add_argument("--outdir", default=None)

    p_sweep = sub.add_parser("sweep", help="run a config over axis grids")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", action="append", default=[],
                         help="key=v1,v2,... (repeatable)")
    p_sweep.add_argument("--outdir", default=None)

    p_check = sub.add_parser("check", help="evaluate a theorem criterion")
    p_check.add_argument("reports", nargs="+", help="run.json paths")
    p_check.add_argument("--criterion", required=True,
                         choices=["thm-2.1", "thm-2.2", "delta-family"])

    p_self = sub.add_parser("lp-selftest", help="frequency-calculus self test")
    p_self.add_argument("--grid", type=int, default=256)
    p_self.add_argument("--trials", type=int, default=1000)

    p_audit = sub.add_parser("coeff-audit", help="empirical family constants")
    p_audit.add_argument("family")
    p_audit.add_argument("--params", default="",
                         help="comma-separated key=value family parameters")
    p_audit.add_argument("--dim", type=int, default=1)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "simulate":
        cfg = ExperimentConfig.load(args.config)
        if args.outdir:
            cfg.outdir = args.outdir
        report = run(cfg)
        print(report.to_json())
        return 0

    if args.command == "sweep":
        cfg = ExperimentConfig.load(args.config)
        if args.outdir:
            cfg.outdir = args.outdir
        axes = {}
        for spec in args.axis:
            key, raw = _parse_axis(spec)
            if key not in axes:
                axes[key] = []
            axes[key].extend(_axis_values(key, raw))
        results = sweep(cfg, axes)
        failures = [cell for cell, rep, err in results if rep is None]
        for cell, rep, err in results:
            tag = "-".join(f"{k}={v}" for k, v in cell.items()) or "single"
            print(f"{tag}: {'ok' if rep else err}")
        return 1 if failures else 0

    if args.command == "check":
        reports = [RunReport.load(p) for p in args.reports]
        result = check_theorem(reports, args.criterion)
        print(json.dumps({"criterion": result.which, "passed": result.passed,
                          "margins": result.margins}, indent=2))
        return 0 if result.passed else 1

    if args.command == "lp-selftest":
        results = lp_selftest(args.grid, args.trials)
        ok = True
        for name, passed, value in results:
            print(f"{'PASS' if passed else 'FAIL'} {name}: {value:.3e}")
            ok = ok and passed
        return 0 if ok else 1

    if args.command == "coeff-audit":
        params = {}
        if args.params:
            for item in args.params.split(","):
                key, _, val = item.partition("=")
                try:
                    params[key.strip()] = float(val)
                except ValueError:
                    params[key.strip()] = val.strip()
        # integer-valued family parameters
        for key in ("terms",):
            if key in params:
                params[key] = int(params[key])
        print(json.dumps(coeff_audit(args.family, params, args.dim), indent=2,
                         default=float))
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
