"""Experiment and sweep configuration.

Config files are flat text with dotted key paths, one `key = value` pair per
line; values are JSON fragments (bare words are read as strings).  Example:

    model.L = 8
    generator.variant = per_term
    integrator.epsilon = 0.05
    integrator.tau_max = 3.0
    truncation.schedule = [[0.0, 3], [0.9, 5], [1.4, 7]]
    sampling.stride = 2
    output.dir = out/run

Sweep files use the same format plus `sweep.<key> = [v1, v2, ...]` lines
declaring the axes; the cartesian product over axes in declaration order
defines the sweep points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .engine import GeneratorVariant, WidthSchedule
from .errors import ConfigError

DEFAULTS = {
    "model.L": None,  # required
    "model.lambda_z": 2.0,
    "generator.variant": "per_term",
    "generator.u1": 0.0,
    "generator.u2": 0.0,
    "integrator.epsilon": None,  # required
    "integrator.tau_max": None,  # required
    "truncation.schedule": [[0.0, None]],
    "truncation.retention": "containment",
    "sampling.stride": 1,
    "tolerances.prune": 1e-12,
    "tolerances.hermiticity": 1e-10,
    "limits.term_cap": None,
    "limits.dense_cap": 12,
    "engine.merge_coupled": True,
    "output.dir": "out",
    "output.snapshots": False,
}

SWEEP_POINT_CAP = 256


def parse_config_text(text: str) -> dict:
    """Parse dotted-key lines into an ordered mapping."""
    out: dict = {}
    for ln_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln_no}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        val = val.strip()
        try:
            parsed = json.loads(val)
        except json.JSONDecodeError:
            parsed = val  # bare word, e.g. a variant name or a path
        if key in out:
            raise ConfigError(f"line {ln_no}: duplicate key {key!r}")
        out[key] = parsed
    return out


def load_config_file(path: str | Path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text())


def _as_int(key, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return v


def _as_float(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return float(v)


@dataclass(frozen=True)
class ExperimentSpec:
    """Validated description of one run."""

    length: int
    lambda_z: float
    variant: GeneratorVariant
    epsilon: float
    tau_max: float
    schedule: WidthSchedule
    retention: str
    stride: int
    prune_tol: float
    hermiticity_tol: float
    term_cap: int | None
    dense_cap: int
    merge_coupled: bool
    output_dir: str
    snapshots: bool
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentSpec":
        cfg = dict(DEFAULTS)
        unknown = [k for k in mapping if k not in DEFAULTS]
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(mapping)
        for req in ("model.L", "integrator.epsilon", "integrator.tau_max"):
            if cfg[req] is None:
                raise ConfigError(f"missing required key {req}")

        length = _as_int("model.L", cfg["model.L"])
        if length < 2:
            raise ConfigError("model.L must be at least 2")
        epsilon = _as_float("integrator.epsilon", cfg["integrator.epsilon"])
        tau_max = _as_float("integrator.tau_max", cfg["integrator.tau_max"])
        if epsilon <= 0:
            raise ConfigError("integrator.epsilon must be positive")
        if tau_max < epsilon:
            raise ConfigError("integrator.tau_max must be at least one step")
        stride = _as_int("sampling.stride", cfg["sampling.stride"])
        if stride < 1:
            raise ConfigError("sampling.stride must be >= 1")

        kind = cfg["generator.variant"]
        try:
            variant = GeneratorVariant(
                kind,
                _as_float("generator.u1", cfg["generator.u1"]),
                _as_float("generator.u2", cfg["generator.u2"]),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        sched_raw = cfg["truncation.schedule"]
        if not isinstance(sched_raw, list) or not all(
            isinstance(seg, list) and len(seg) == 2 for seg in sched_raw
        ):
            raise ConfigError("truncation.schedule must be a list of [tau, width] pairs")
        try:
            schedule = WidthSchedule(
                tuple((float(t), None if w is None else int(w)) for t, w in sched_raw)
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad width schedule: {exc}") from exc
        if variant.kind == "naive" and any(w is not None for _, w in schedule.segments):
            raise ConfigError("the naive generator does not support width truncation")
        for _, w in schedule.segments:
            if w is not None and w > length:
                raise ConfigError(f"schedule width {w} exceeds the chain length")

        retention = cfg["truncation.retention"]
        if retention not in ("containment", "overlap"):
            raise ConfigError("truncation.retention must be containment or overlap")

        prune_tol = _as_float("tolerances.prune", cfg["tolerances.prune"])
        herm_tol = _as_float("tolerances.hermiticity", cfg["tolerances.hermiticity"])
        if prune_tol < 0 or herm_tol <= 0:
            raise ConfigError("tolerances must be nonnegative (hermiticity positive)")

        cap = cfg["limits.term_cap"]
        if cap is not None:
            cap = _as_int("limits.term_cap", cap)
            if cap < 1:
                raise ConfigError("limits.term_cap must be positive")
        dense_cap = _as_int("limits.dense_cap", cfg["limits.dense_cap"])

        return cls(
            length=length,
            lambda_z=_as_float("model.lambda_z", cfg["model.lambda_z"]),
            variant=variant,
            epsilon=epsilon,
            tau_max=tau_max,
            schedule=schedule,
            retention=retention,
            stride=stride,
            prune_tol=prune_tol,
            hermiticity_tol=herm_tol,
            term_cap=cap,
            dense_cap=dense_cap,
            merge_coupled=bool(cfg["engine.merge_coupled"]),
            output_dir=str(cfg["output.dir"]),
            snapshots=bool(cfg["output.snapshots"]),
            raw={k: cfg[k] for k in DEFAULTS},
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentSpec":
        return cls.from_mapping(load_config_file(path))

    def mapping(self) -> dict:
        """Canonical dotted-key mapping (round-trips through from_mapping)."""
        return dict(self.raw)


@dataclass(frozen=True)
class SweepSpec:
    """A base experiment plus value lists along dotted-key axes."""

    base: dict
    axes: dict

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SweepSpec":
        base, axes = {}, {}
        for key, val in mapping.items():
            if key.startswith("sweep."):
                axis = key[len("sweep."):]
                if axis not in DEFAULTS:
                    raise ConfigError(f"unknown sweep axis {axis!r}")
                if not isinstance(val, list) or not val:
                    raise ConfigError(f"sweep axis {axis!r} needs a nonempty list")
                axes[axis] = val
            else:
                base[key] = val
        n_points = 1
        for vals in axes.values():
            n_points *= len(vals)
        if n_points > SWEEP_POINT_CAP:
            raise ConfigError(
                f"sweep would produce {n_points} points (cap {SWEEP_POINT_CAP})"
            )
        ExperimentSpec.from_mapping(base)  # validate the base eagerly
        return cls(base=base, axes=axes)

    @classmethod
    def from_file(cls, path: str | Path) -> "SweepSpec":
        return cls.from_mapping(load_config_file(path))

    def points(self) -> list[tuple[dict, dict]]:
        """(axis-assignment, full mapping) per point, in axis declaration order."""
        import itertools

        names = list(self.axes)
        combos = itertools.product(*(self.axes[n] for n in names))
        out = []
        for combo in combos:
            assignment = dict(zip(names, combo))
            mapping = dict(self.base)
            mapping.update(assignment)
            out.append((assignment, mapping))
        return out
