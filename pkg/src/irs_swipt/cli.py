"""Command-line entry points: run experiments, validate configs, self-check."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .experiments import load_config, run_experiment, timing_path_for
from .oracles import run_certification


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irs-swipt",
        description="Joint transmit/reflection beamforming simulator for "
                    "IRS-assisted SWIPT downlinks")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a Monte-Carlo experiment sweep")
    run_p.add_argument("config", help="YAML experiment config")
    run_p.add_argument("--workers", type=int, default=1,
                       help="parallel trial workers (default 1)")
    run_p.add_argument("--out", default=None,
                       help="result CSV path (default: config's output_path)")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config's base_seed")
    run_p.add_argument("--plots", action="store_true",
                       help="render comparison figures next to the CSV")

    val_p = sub.add_parser("validate", help="parse and echo a config")
    val_p.add_argument("config", help="YAML experiment config")

    ora_p = sub.add_parser("oracle-check",
                           help="certify solver blocks against slow references")
    ora_p.add_argument("--trials", type=int, default=1000)
    ora_p.add_argument("--seed", type=int, default=0)

    rep_p = sub.add_parser("report", help="render figures from a result CSV")
    rep_p.add_argument("results", help="CSV produced by `run`")
    rep_p.add_argument("--out-dir", default=None)
    rep_p.add_argument("--format", default="png", choices=("png", "pdf", "svg"))
    rep_p.add_argument("--xlabel", default="sweep value")
    return parser


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.workers < 1:
        print("--workers must be >= 1", file=sys.stderr)
        return 2
    out, failures = run_experiment(cfg, workers=args.workers,
                                   out_path=args.out, base_seed=args.seed)
    rows = len(cfg.sweep_values) * cfg.n_seeds * len(cfg.solvers) - failures
    print(f"wrote {rows} rows to {out}")
    print(f"timings in {timing_path_for(out)}")
    if args.plots:
        from .plots import render_report
        for path in render_report(out, xlabel=cfg.sweep_variable):
            print(f"figure {path}")
    if failures:
        print(f"{failures} solver runs failed", file=sys.stderr)
        return 1
    return 0


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for field in dataclasses.fields(cfg):
        print(f"{field.name}: {getattr(cfg, field.name)}")
    print(f"experiment_id: {cfg.experiment_id()}")
    return 0


def _cmd_oracle_check(args) -> int:
    results = run_certification(trials=args.trials, seed=args.seed)
    ok = True
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        ok &= res.passed
        print(f"{status} {res.name}: {res.detail}")
    return 0 if ok else 1


def _cmd_report(args) -> int:
    from .plots import render_report
    try:
        paths = render_report(args.results, out_dir=args.out_dir,
                              fmt=args.format, xlabel=args.xlabel)
    except (OSError, ValueError) as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(f"figure {path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "validate": _cmd_validate,
               "oracle-check": _cmd_oracle_check, "report": _cmd_report}
    return handler[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
