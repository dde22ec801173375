"""Command-line entry point.

Verbs:
    itflow run <spec-file>                 execute one experiment
    itflow sweep <sweep-file> --jobs N     cartesian parameter sweep
    itflow plot <records-or-index> --figure {1..5} [--out DIR]
    itflow verify                          quick invariant battery (L <= 6)

Exit codes: 0 success, 2 config/schema error, 3 integration diverged,
4 resource limit, 1 anything else.  Failures emit one machine-readable JSON
line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentSpec, SweepSpec
from .errors import ConfigError, SchemaError
from .runner import EXIT_CONFIG, exit_code_for, resolve_output_dir, run, run_sweep


def _fail(exc: BaseException, out_dir: Path | None = None) -> int:
    code = EXIT_CONFIG if isinstance(exc, SchemaError) else exit_code_for(exc)
    payload = {
        "error_type": type(exc).__name__,
        "message": str(exc),
        "exit_code": code,
    }
    line = json.dumps(payload, sort_keys=True)
    print(line, file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "error.json").write_text(line + "\n")
        except OSError:
            pass
    return code


def _cmd_run(args) -> int:
    out_dir = None
    try:
        spec = ExperimentSpec.from_file(args.spec)
        out_dir = resolve_output_dir(spec.output_dir)
        _, summary = run(spec)
    except Exception as exc:
        return _fail(exc, out_dir)
    print(
        f"tau_c={summary.tau_c:.6g} min_i_inf={summary.min_i_inf:.6g} "
        f"max_i_tau={summary.max_i_tau:.6g} -> {out_dir}"
    )
    return 0


def _cmd_sweep(args) -> int:
    try:
        sweep = SweepSpec.from_file(args.sweep)
        index_path, index = run_sweep(sweep, jobs=args.jobs)
    except Exception as exc:
        return _fail(exc)
    print(f"{index['n_points']} points, {index['n_failed']} failed -> {index_path}")
    if index["n_failed"]:
        for entry in index["points"]:
            if entry["status"] != "ok":
                return int(entry.get("exit_code", 1))
    return 0


def _cmd_plot(args) -> int:
    from .plots import emit_plots

    try:
        written = emit_plots(args.source, figure=args.figure, out_dir=args.out)
    except Exception as exc:
        return _fail(exc)
    for path in written:
        print(path)
    return 0


def _cmd_verify(_args) -> int:
    from .verify import run_quick_suite

    return 0 if run_quick_suite() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="itflow",
        description="Imaginary-time operator flow experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one experiment spec")
    p_run.add_argument("spec", help="path to the experiment config file")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("sweep", help="path to the sweep config file")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_plot = sub.add_parser("plot", help="emit figures from records or an index")
    p_plot.add_argument("source", help="records.csv, run directory, or sweep index.json")
    p_plot.add_argument("--figure", type=int, required=True, choices=range(1, 6))
    p_plot.add_argument("--out", default="figures", help="output directory")
    p_plot.set_defaults(func=_cmd_plot)

    p_verify = sub.add_parser("verify", help="run the quick invariant battery")
    p_verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
