"""Static figure emission from trajectory records.

All figures are vector PDF with a fixed style; curves are labeled by the
swept parameter. Layout follows the standard four-panel view: both
infidelities (log scale), the instantaneous gap, and the operator norm
against imaginary time.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import CSV_COLUMNS
from .errors import SchemaError

_STYLE = {
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "font.size": 9,
}


def load_records_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a records.csv into column arrays, validating the schema."""
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"records file not found: {p}")
    lines = [ln for ln in p.read_text().splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"records file is empty: {p}")
    header = lines[0].split(",")
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"records file {p} missing columns: {', '.join(missing)}")
    if len(lines) < 2:
        raise SchemaError(f"records file {p} has a header but no rows")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return {c: data[:, header.index(c)] for c in header}


def _curve_sets(source: str | Path) -> list[tuple[str, dict]]:
    """(label, columns) pairs from either a records.csv or a sweep index.json."""
    p = Path(source)
    if p.name.endswith(".json") or (p.is_dir() and (p / "index.json").is_file()):
        index_path = p if p.is_file() else p / "index.json"
        index = json.loads(index_path.read_text())
        out = []
        for entry in index.get("points", []):
            if entry.get("status") != "ok":
                continue
            label = ", ".join(f"{k.split('.')[-1]}={v}" for k, v in entry["params"].items()) or f"point {entry['index']}"
            out.append((label, load_records_csv(Path(entry["dir"]) / "records.csv")))
        if not out:
            raise SchemaError(f"no successful points found in {index_path}")
        return out
    if p.is_dir():
        p = p / "records.csv"
    return [("run", load_records_csv(p))]


def four_panel(curves: list[tuple[str, dict]], out_path: Path, title: str | None = None) -> None:
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(8.2, 6.0), sharex=True)
        panels = [
            ("i_inf", "infidelity to target", True),
            ("i_tau", "infidelity to ITE state", True),
            ("gap", "instantaneous gap", True),
            ("norm", "operator norm", True),
        ]
        for ax, (col, label, logy) in zip(axes.ravel(), panels):
            for name, cols in curves:
                y = cols[col]
                if logy:
                    y = np.clip(y, 1e-18, None)
                ax.plot(cols["tau"], y, label=name)
            if logy:
                ax.set_yscale("log")
            ax.set_ylabel(label)
        for ax in axes[1]:
            ax.set_xlabel(r"imaginary time $\tau$")
        axes[0, 0].legend(fontsize=7)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)


def width_overlay(
    curves: list[tuple[str, dict]],
    out_path: Path,
    transitions: list[float] | None = None,
) -> None:
    """Infidelity-to-target overlay across widths, with schedule markers."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.4, 4.0))
        for name, cols in curves:
            ax.plot(cols["tau"], np.clip(cols["i_inf"], 1e-18, None), label=name)
        for t in transitions or []:
            ax.axvline(t, color="k", linestyle=":", linewidth=1.0)
        ax.set_yscale("log")
        ax.set_xlabel(r"imaginary time $\tau$")
        ax.set_ylabel("infidelity to target")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)


def emit_plots(source: str | Path, figure: int, out_dir: str | Path) -> list[Path]:
    """Render the requested figure layout from records or a sweep index."""
    if figure not in (1, 2, 3, 4, 5):
        raise SchemaError("figure must be one of 1..5")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curves = _curve_sets(source)
    written: list[Path] = []
    if figure == 4:
        transitions = []
        src = Path(source)
        index_path = src if src.is_file() and src.name.endswith(".json") else src / "index.json"
        if index_path.is_file():
            index = json.loads(index_path.read_text())
            for entry in index.get("points", []):
                sched = entry.get("params", {}).get("truncation.schedule")
                if isinstance(sched, list) and len(sched) > 1:
                    transitions.extend(float(t) for t, _ in sched[1:])
        path = out / "figure4_width_overlay.pdf"
        width_overlay(curves, path, transitions=sorted(set(transitions)))
        written.append(path)
    else:
        path = out / f"figure{figure}_panels.pdf"
        four_panel(curves, path)
        written.append(path)
    return written
