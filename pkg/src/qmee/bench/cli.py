"""``qmee-bench`` command line.

Usage::

    qmee-bench <task> [--config FILE] [--seed S] [--out DIR]
                      [--trials K] [--n N] [--workers W] [--no-plot]

On success one JSON line ``{"status": "ok", ...}`` listing the written files
goes to stdout and the exit code is 0. On failure one JSON line
``{"status": "error", "kind": ..., "message": ...}`` goes to stderr and the
exit code is 2 for usage/config errors and 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import TASKS, ConfigError, load_config
from .report import ReportError, ensure_dir, write_csv


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmee-bench", description="QMEE experiment runner")
    sub = parser.add_subparsers(dest="task", metavar="task", parser_class=_Parser)
    sub.required = True
    for task in TASKS:
        p = sub.add_parser(task, help=f"run the {task} experiment")
        p.add_argument("--config", help="INI config file (defaults are used for missing keys)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", default="results", help="output directory (default: results)")
        p.add_argument("--trials", type=int, help="number of trials / timing repeats")
        p.add_argument("--n", help="sample count; comma-separated list for timing")
        p.add_argument("--workers", type=int, help="worker processes for trials")
        p.add_argument("--no-plot", action="store_true", help="skip SVG figures")
    return parser


def _emit_error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"status": "error", "kind": kind, "message": message}), file=sys.stderr)
    return code


def _write_outputs(task: str, report, extras: dict, out: str, plot: bool) -> list:
    from . import plotting

    files = [write_csv(report, os.path.join(out, f"{task}.csv"))]
    if task == "surface":
        grid = extras["grid"]
        path = os.path.join(out, "surface_grid.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("criterion,w1,w2,cost\n")
            for crit, a, b, v in grid.rows():
                fh.write(f"{crit},{a!r},{b!r},{v!r}\n")
        files.append(path)
    if plot:
        svg = os.path.join(out, f"{task}.svg")
        if task == "timing":
            plotting.plot_timing(report, svg)
        elif task == "surface":
            plotting.plot_surface(extras["grid"], svg)
        elif task == "esn":
            plotting.plot_esn(report, svg)
        else:
            plotting.plot_metric_bars(report, svg)
        files.append(svg)
    return files


def main(argv=None) -> int:
    from .experiments import run_experiment

    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        return _emit_error("usage", str(exc), 2)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    n = args.n
    if n is not None and args.task != "timing":
        try:
            n = int(n)
        except ValueError:
            return _emit_error("usage", f"--n expects an integer, got {args.n!r}", 2)
    try:
        cfg = load_config(args.task, args.config, {
            "seed": args.seed, "trials": args.trials, "n": n, "workers": args.workers})
        ensure_dir(args.out)
        report, extras = run_experiment(cfg)
        files = _write_outputs(args.task, report, extras, args.out, not args.no_plot)
    except ConfigError as exc:
        return _emit_error("config", str(exc), 2)
    except ReportError as exc:
        return _emit_error("output", str(exc), 1)
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        return _emit_error(type(exc).__name__, str(exc), 1)
    print(json.dumps({"status": "ok", "task": args.task, "files": files}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
