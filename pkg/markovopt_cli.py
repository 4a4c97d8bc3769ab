# -*- coding: utf-8 -*-
"""CLI for markovopt experiments.
Usage:
    python markovopt_cli.py run --experiment fig1 --scale desk --seed 0 --seeds 5 --out fig1.csv [--jobs 4] [--config run.cfg] [key=value ...]
    python markovopt_cli.py summarize --in fig1.csv --out fig1.summary.csv
    python markovopt_cli.py verify --suite all
Exit codes: 0 ok, 1 verification failure, 2 config error.
MARKOVOPT_SEED overrides --seed.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from markovopt_config import __doc__ as CONFIG_KEYS_DOC
from markovopt_config import build_config, load_config_file, parse_overrides
from markovopt_csv_utils import summarize
from markovopt_errors import MarkovOptError
from markovopt_harness import run_experiment
from markovopt_verify import SUITES, verify

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description="Markovian stochastic optimization experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an experiment preset and write its trace CSV",
                         epilog=CONFIG_KEYS_DOC, formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("--experiment", choices=["fig1", "fig2", "nonconvex", "td", "custom"])
    run.add_argument("--scale", choices=["desk", "full"])
    run.add_argument("--seed", type=int, help="Base seed (64-bit)")
    run.add_argument("--seeds", type=int, help="Number of seeds per method")
    run.add_argument("--out", type=Path, help="Output CSV path")
    run.add_argument("--jobs", type=int, help="Concurrent runs")
    run.add_argument("--config", type=Path, help="key=value config file")
    run.add_argument("overrides", nargs="*", metavar="key=value", help="Config key overrides")

    summ = sub.add_parser("summarize", help="Mean and 95%% CI over seeds")
    summ.add_argument("--in", dest="inp", type=Path, required=True, help="Trace CSV")
    summ.add_argument("--out", type=Path, required=True, help="Summary CSV")

    ver = sub.add_parser("verify", help="Run the property suites")
    ver.add_argument("--suite", choices=sorted(SUITES) + ["all"], default="all")
    return ap


def _cmd_run(args: argparse.Namespace) -> int:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = parse_overrides(args.overrides)
    flags = {"experiment": args.experiment, "scale": args.scale, "base_seed": args.seed,
             "seeds": args.seeds, "out": args.out, "jobs": args.jobs}
    overrides.update({k: v for k, v in flags.items() if v is not None})
    config = build_config(file_values, overrides)
    run_experiment(config, log=_log)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "summarize":
            out = summarize(args.inp, args.out)
            _log(f"[summarize] wrote {out}")
            return EXIT_OK
        return EXIT_OK if verify(args.suite, log=print) else EXIT_VERIFY_FAILED
    except (MarkovOptError, ValueError, FileNotFoundError) as e:
        _log(f"[error] {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
