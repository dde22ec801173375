"""Config-driven experiment execution with deterministic serialized outputs.

A run writes into its output directory:

    records.csv    -- one row per sampled tau, fixed column order, no
                      timestamps; byte-identical across repeated runs
    summary.json   -- turnover/cost summary plus invariant aggregates
    metadata.json  -- wall time, versions, timestamps (kept out of the data
                      files so those stay reproducible)
    snapshots/     -- optional textual operator dumps, one file per sample

Sweeps run each point in its own subprocess; points are independent, so
results do not depend on the degree of parallelism.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentSpec, SweepSpec
from .diagnostics import (
    CSV_COLUMNS,
    ReferenceSet,
    TrajectoryRecord,
    TrajectorySummary,
    detect_tau_c,
    snapshot_record,
)
from .engine import evolve_iter
from .errors import ConfigError, IntegrationDivergedError, ResourceLimitError
from .models import ModelSpec, build_xxz, initial_state, total_operator

OUTPUT_ROOT_ENV = "ITFLOW_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_RESOURCE = 4

_ERROR_EXIT_CODES = (
    (ConfigError, EXIT_CONFIG),
    (IntegrationDivergedError, EXIT_DIVERGED),
    (ResourceLimitError, EXIT_RESOURCE),
)


def exit_code_for(exc: BaseException) -> int:
    for etype, code in _ERROR_EXIT_CODES:
        if isinstance(exc, etype):
            return code
    return 1


def resolve_output_dir(path: str) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    p = Path(path)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(int(v))


def records_to_csv(records: list[TrajectoryRecord]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(",".join(_fmt(v) for v in r.csv_row()))
    return "\n".join(lines) + "\n"


def summary_to_dict(summary: TrajectorySummary, records: list[TrajectoryRecord], spec: ExperimentSpec, extra: dict) -> dict:
    bounded = [r for r in records if r.active_width is not None]
    return {
        "tau_c": summary.tau_c,
        "min_i_inf": summary.min_i_inf,
        "max_i_tau": summary.max_i_tau,
        "tau_at_max_i_tau": summary.tau_at_max_i_tau,
        "adiabatic_cost": None if summary.infinite_cost else summary.adiabatic_cost,
        "infinite_cost": summary.infinite_cost,
        "no_turnover": summary.no_turnover,
        "ordering_ok": summary.ordering_ok,
        "max_symmetry_residual": max((r.symmetry_residual for r in records), default=0.0),
        "max_e0_residual": max((r.e0_residual for r in records), default=0.0),
        "locality_ok": all(r.max_support_width <= r.active_width for r in bounded),
        "final_term_count": records[-1].term_count,
        "n_records": len(records),
        "spec": spec.mapping(),
        **extra,
    }


def run(spec: ExperimentSpec, write: bool = True) -> tuple[list[TrajectoryRecord], TrajectorySummary]:
    """Execute one experiment; streams snapshots so large registers fit in memory."""
    t_start = time.time()
    model_sum = total_operator(build_xxz(ModelSpec(spec.length, spec.lambda_z)))
    psi0 = initial_state(spec.length)
    refs = ReferenceSet(model_sum, psi0, dense_cap=max(spec.dense_cap, spec.length))

    out_dir = resolve_output_dir(spec.output_dir)
    snap_dir = out_dir / "snapshots"
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        if spec.snapshots:
            snap_dir.mkdir(exist_ok=True)

    records: list[TrajectoryRecord] = []
    merged_seen = False
    for index, (tau, state) in enumerate(evolve_iter(spec)):
        total = state.total()
        rec = snapshot_record(
            tau,
            total,
            refs,
            term_count=state.term_count,
            max_support_width=state.max_support_width,
            dense_cap=max(spec.dense_cap, spec.length),
            active_width=state.active_width,
        )
        records.append(rec)
        merged_seen = merged_seen or state.merged
        if write and spec.snapshots:
            (snap_dir / f"snapshot_{index:05d}.txt").write_text(total.to_text())

    summary = detect_tau_c(records, stride_tau=spec.stride * spec.epsilon)
    if write:
        (out_dir / "records.csv").write_text(records_to_csv(records))
        sdict = summary_to_dict(summary, records, spec, {"merged_evolution": merged_seen})
        (out_dir / "summary.json").write_text(json.dumps(sdict, indent=2, sort_keys=True) + "\n")
        meta = {
            "itflow_version": __version__,
            "wall_seconds": time.time() - t_start,
            "finished_at_unix": time.time(),
        }
        (out_dir / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    return records, summary


def _sweep_worker(mapping: dict, out_dir: str) -> dict:
    mapping = dict(mapping)
    mapping["output.dir"] = out_dir
    try:
        spec = ExperimentSpec.from_mapping(mapping)
        _, summary = run(spec)
        return {"status": "ok", "tau_c": summary.tau_c, "min_i_inf": summary.min_i_inf}
    except Exception as exc:  # recorded per point, the sweep keeps going
        return {
            "status": "error",
            "error_type": type(exc).__name__,
            "message": str(exc),
            "exit_code": exit_code_for(exc),
        }


def run_sweep(sweep: SweepSpec, jobs: int = 1) -> tuple[Path, dict]:
    """Run all sweep points; returns (index path, index mapping).

    Points execute in separate processes; per-point outputs are identical
    regardless of `jobs`.
    """
    if jobs < 1:
        raise ConfigError("jobs must be positive")
    base_out = resolve_output_dir(sweep.base.get("output.dir", "out"))
    base_out.mkdir(parents=True, exist_ok=True)
    points = sweep.points()

    entries = []
    dirs = []
    for i, (assignment, _) in enumerate(points):
        point_dir = base_out / f"point_{i:04d}"
        dirs.append(point_dir)
        entries.append({"index": i, "params": assignment, "dir": str(point_dir)})

    if jobs == 1 or len(points) == 1:
        statuses = [
            _sweep_worker(mapping, str(d))
            for (_, mapping), d in zip(points, dirs)
        ]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_sweep_worker, mapping, str(d))
                for (_, mapping), d in zip(points, dirs)
            ]
            statuses = [f.result() for f in futures]

    for entry, status in zip(entries, statuses):
        entry.update(status)
    index = {
        "axes": sweep.axes,
        "base": sweep.base,
        "points": entries,
        "n_points": len(entries),
        "n_failed": sum(1 for e in entries if e["status"] != "ok"),
    }
    index_path = base_out / "index.json"
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return index_path, index
