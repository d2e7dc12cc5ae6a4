"""Command-line entry points for the experiment harness.

Subcommands mirror the experiment modes (mean-exp, cov-exp, pipeline) plus
plot-data, which re-aggregates a result CSV into per-estimator mean/std
columns.  A flat `key = value` config file can seed any run; flags override
the file.  Exit codes: 0 success, 1 argument error, 2 runtime/convergence
error.  Progress goes to standard error only.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .experiment import (
    aggregate,
    config_from_sources,
    parse_config_text,
    read_csv,
    run_experiment,
    stderr_progress,
    write_csv,
    write_sidecar,
)
from .linalg import ConvergenceError


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--d", type=int, help="dimension")
    parser.add_argument("--s", type=int, help="sparsity of the advice gap")
    parser.add_argument("--q", type=float, help="l1 norm of the advice gap")
    parser.add_argument("--n-min", type=int, dest="n_min")
    parser.add_argument("--n-max", type=int, dest="n_max")
    parser.add_argument("--n-step", type=int, dest="n_step")
    parser.add_argument("--repeats", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--eps", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--eta", type=float)
    parser.add_argument("--holdout", action="store_const", const=True, default=None,
                        help="pick the mean-estimator radius on an 80/20 split")
    parser.add_argument("--out", dest="output_path", help="output CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaussadvice", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in ("mean-exp", "cov-exp", "pipeline"):
        mode_parser = sub.add_parser(mode)
        _add_common_flags(mode_parser)
    plot = sub.add_parser("plot-data", help="aggregate a result CSV")
    plot.add_argument("csv", help="input CSV from an experiment run")
    plot.add_argument("--out", help="write the aggregate CSV here instead of stdout")
    return parser


_FLAG_KEYS = (
    "d", "s", "q", "n_min", "n_max", "n_step", "repeats",
    "seed", "eps", "delta", "eta", "holdout", "output_path",
)


def _run_experiment_command(args) -> int:
    file_values: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as handle:
            file_values = parse_config_text(handle.read())
    flag_values = {key: getattr(args, key) for key in _FLAG_KEYS}
    file_values["mode"] = args.command
    config = config_from_sources(file_values, flag_values)
    rows = run_experiment(config, progress=stderr_progress)
    write_csv(rows, config.output_path)
    write_sidecar(config, config.output_path)
    stderr_progress(f"wrote {len(rows)} rows to {config.output_path}")
    return 0


def _plot_data_command(args) -> int:
    rows = read_csv(args.csv)
    lines = ["estimator,n,mean_error,std_error"]
    for estimator, n, mean, std in aggregate(rows):
        lines.append(f"{estimator},{n},{mean:.17g},{std:.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "plot-data":
            return _plot_data_command(args)
        return _run_experiment_command(args)
    except (_ArgumentError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
