"""Operator-flow integrator for the adiabatic Hamiltonian.

Three generating equations are supported for the local terms of the evolving
Hamiltonian:

  naive    -- the whole operator evolves as dY/dtau = YH + HY,
  per_term -- each local term evolves as dy/dtau = sum_a {y, h_a}', where
              {.,.}' is the anticommutator zeroed when the operands commute
              as whole operators,
  gauged   -- per_term plus an extra generator f(y) = u1*y - u2*y^2.

Integration uses Heun's second-order Runge-Kutta, split into substeps: one
full step advances tau by epsilon and applies, for every model term h_a in
ascending bond order, one RK2 substep of duration epsilon driven by that
single h_a.  For the gauged variant one extra substep applies f after the
bond sweep.  The per-term commutation test is evaluated once per substep on
the pre-substep term; within the non-commuting branch the right-hand side is
linear, so the Heun update is applied in its polynomial form
y + eps*F(y) + (eps^2/2)*F(F(y)).

All flow arithmetic is real: anticommutators of real Pauli sums have exactly
real coefficients, so the Hermiticity residual of the evolving operator is
identically zero and the imaginary-part discard step is a no-op by
construction.

A width schedule truncates the per-term interaction sums to neighborhood
blocks; with unbounded width the per_term flow couples every term to every
bond after a few steps, at which point the summed operator evolves by exactly
the naive update.  When `merge_coupled` is set (the default), the engine
detects full coupling and continues with the merged operator, which is
algebraically identical and an order of magnitude cheaper at L = 12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterator

import numpy as np

from . import kernels
from .errors import IntegrationDivergedError, ResourceLimitError
from .models import LocalTerm, ModelSpec, block_for, build_initial_adiabatic, build_xxz
from .pauli import (
    DEFAULT_PRUNE_TOL,
    PauliSum,
    anticommutator,
    hermiticity_residual,
    modified_anticommutator,
    sum_combine,
    sum_multiply,
)

if TYPE_CHECKING:
    from .config import ExperimentSpec

DEFAULT_HERMITICITY_TOL = 1e-10
VARIANT_KINDS = ("naive", "per_term", "gauged")


@dataclass(frozen=True)
class GeneratorVariant:
    """Which generating equation drives the flow, plus gauge coefficients."""

    kind: str
    u1: float = 0.0
    u2: float = 0.0

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if not (math.isfinite(self.u1) and math.isfinite(self.u2)):
            raise ValueError("gauge coefficients must be finite")
        if self.kind != "gauged" and (self.u1 != 0.0 or self.u2 != 0.0):
            raise ValueError("u1, u2 must vanish unless kind == 'gauged'")


@dataclass(frozen=True)
class WidthSchedule:
    """Piecewise-constant neighborhood width; None means unbounded.

    Segments are (tau_start, width) with strictly increasing start times,
    the first at tau = 0.  Widths must be odd and non-decreasing (blocks only
    ever grow), and may not become bounded again after an unbounded segment.
    """

    segments: tuple[tuple[float, int | None], ...] = ((0.0, None),)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        if self.segments[0][0] != 0.0:
            raise ValueError("first schedule segment must start at tau = 0")
        prev_t = -1.0
        prev_w: int | None = 1
        for t, w in self.segments:
            if t <= prev_t:
                raise ValueError("segment start times must increase strictly")
            if w is not None:
                if w < 1 or w % 2 == 0:
                    raise ValueError(f"width {w} must be an odd positive integer")
                if prev_w is None:
                    raise ValueError("width cannot become bounded after unbounded")
                if w < prev_w:
                    raise ValueError("widths must be non-decreasing")
            prev_t, prev_w = t, w

    def active_width(self, tau: float) -> int | None:
        w = self.segments[0][1]
        for t, seg_w in self.segments:
            if t <= tau + 1e-9:
                w = seg_w
            else:
                break
        return w

    @classmethod
    def unbounded(cls) -> "WidthSchedule":
        return cls(((0.0, None),))

    @classmethod
    def constant(cls, width: int | None) -> "WidthSchedule":
        return cls(((0.0, width),))


@dataclass
class AdiabaticState:
    """Snapshot of the evolving operator at one imaginary time."""

    tau: float
    terms: list[LocalTerm]
    variant: GeneratorVariant
    active_width: int | None
    merged: bool
    max_support_width: int
    _total: PauliSum | None = field(default=None, repr=False)

    def total(self) -> PauliSum:
        """Merged sum of all local terms."""
        if self._total is None:
            n = self.terms[0].op.n_qubits
            keys = np.concatenate([t.op.keys for t in self.terms])
            coeffs = np.concatenate([t.op.coeffs for t in self.terms])
            self._total = PauliSum(n, keys, coeffs)
        return self._total

    @property
    def term_count(self) -> int:
        return len(self.total())


# -- raw term state --------------------------------------------------------


class _Term:
    __slots__ = ("ikeys", "vals", "home", "block")

    def __init__(self, ikeys, vals, home, block):
        self.ikeys = ikeys
        self.vals = vals
        self.home = home
        self.block = block


def _term_from_local(lt: LocalTerm, herm_tol: float) -> _Term:
    resid = hermiticity_residual(lt.op)
    if resid > herm_tol:
        raise ValueError(f"non-Hermitian local term (residual {resid:.3e})")
    ik = kernels.interleave_keys(lt.op.keys, lt.op.n_qubits)
    order = np.argsort(ik)
    return _Term(ik[order], lt.op.coeffs.real[order].copy(), lt.home_site, lt.block)


def _max_extent_interleaved(ikeys: np.ndarray, zm: int) -> int:
    if len(ikeys) == 0:
        return 0
    m = (ikeys | (ikeys >> 1)) & zm
    m = m[m > 0]
    if len(m) == 0:
        return 0
    hi = np.floor(np.log2(m.astype(np.float64))).astype(np.int64) >> 1
    lo = np.floor(np.log2((m & -m).astype(np.float64))).astype(np.int64) >> 1
    return int(np.max(hi - lo) + 1)


class FlowEngine:
    """Integrates the flow for one experiment; owns the merge buffers."""

    def __init__(
        self,
        length: int,
        model_terms: list[LocalTerm],
        initial_terms: list[LocalTerm],
        variant: GeneratorVariant,
        prune_tol: float = DEFAULT_PRUNE_TOL,
        herm_tol: float = DEFAULT_HERMITICITY_TOL,
        term_cap: int | None = None,
        merge_coupled: bool = True,
        retention: str = "containment",
        merged: bool = False,
    ):
        if length > kernels.MAX_KERNEL_QUBITS:
            raise ResourceLimitError(
                f"flow engine supports at most {kernels.MAX_KERNEL_QUBITS} qubits"
            )
        if retention not in ("containment", "overlap"):
            raise ValueError(f"unknown retention rule {retention!r}")
        self.length = length
        self.variant = variant
        self.prune_tol = prune_tol
        self.herm_tol = herm_tol
        self.term_cap = term_cap
        self.merge_coupled = merge_coupled
        self.retention = retention
        self.tau = 0.0
        self.merged_at: float | None = None

        self.zm = kernels.zmask(length)
        self._pc13 = kernels.popcount_table()
        size = 1 << (2 * length)
        self._acc_even = np.zeros(size, dtype=np.float64)
        self._acc_odd = np.zeros(size, dtype=np.float64)
        self._outk = np.empty(size, dtype=np.int64)
        self._outv = np.empty(size, dtype=np.float64)

        self._model = [_term_from_local(t, herm_tol) for t in model_terms]
        self._model_pcb = [
            np.bitwise_count(m.ikeys & (m.ikeys >> 1) & self.zm).astype(np.int64)
            for m in self._model
        ]
        self._model_site_masks = [self._site_mask(m.ikeys) for m in self._model]

        self.active_width: int | None = None
        self._retained: list[list[int]] = []
        self.terms = [_term_from_local(t, herm_tol) for t in initial_terms]
        self.merged = merged or variant.kind == "naive"
        if self.merged and len(self.terms) > 1:
            self._merge_now()
        self.coupling = np.zeros((len(self.terms), len(self._model)), dtype=bool)
        self.set_active_width(None)

    # -- geometry ------------------------------------------------------------

    def _site_mask(self, ikeys: np.ndarray) -> int:
        """z-position bitmask of occupied sites across all strings."""
        if len(ikeys) == 0:
            return 0
        m = np.bitwise_or.reduce(ikeys)
        return int((m | (m >> 1)) & self.zm)

    def _block_mask(self, block: tuple[int, int]) -> int:
        lo, hi = block
        m = 0
        for j in range(lo, hi + 1):
            m |= 1 << (2 * j)
        return m

    def set_active_width(self, width: int | None) -> None:
        self.active_width = width
        for t in self.terms:
            if self.merged or self.variant.kind == "naive":
                t.block = (0, self.length - 1)
            else:
                t.block = block_for(t.home, width, self.length)
        blocks = [self._block_mask(t.block) for t in self.terms]
        self._retained = []
        for a, amask in enumerate(self._model_site_masks):
            if self.retention == "containment":
                keep = [b for b, bm in enumerate(blocks) if amask & ~bm == 0]
            else:
                keep = [b for b, bm in enumerate(blocks) if amask & bm != 0]
            self._retained.append(keep)

    # -- stepping ------------------------------------------------------------

    def step(self, eps: float) -> None:
        if eps <= 0:
            raise ValueError("step size must be positive")
        primed = self.variant.kind in ("per_term", "gauged")
        for a in range(len(self._model)):
            for b in self._retained[a]:
                self._bond_substep(b, a, eps, primed)
        if self.variant.kind == "gauged":
            for b in range(len(self.terms)):
                self._gauge_substep(b, eps)
        self.tau += eps
        if (
            self.merge_coupled
            and not self.merged
            and self.variant.kind == "per_term"
            and self.active_width is None
            and self.coupling.all()
        ):
            self._merge_now()
            self.merged_at = self.tau

    def _bond_substep(self, b: int, a: int, eps: float, primed: bool) -> None:
        term = self.terms[b]
        if len(term.ikeys) == 0:
            return
        model = self._model[a]
        lo, hi = kernels.pair_scatter(
            term.ikeys, term.vals, model.ikeys, model.vals, self._model_pcb[a],
            self.zm, self._pc13, self._acc_even, self._acc_odd, 1.0, primed,
        )
        if lo > hi:
            return
        if primed:
            odd_max = kernels.max_abs_zero(self._acc_odd, lo, hi)
            if odd_max <= self.prune_tol:
                # whole operators commute: the primed rhs vanishes
                kernels.max_abs_zero(self._acc_even, lo, hi)
                return
            self.coupling[b, a] = True
        n1, bad = kernels.harvest(
            self._acc_even, lo, hi, self.prune_tol, self._outk, self._outv
        )
        if bad:
            raise IntegrationDivergedError(
                f"nonfinite coefficients at tau = {self.tau:.6g}", tau=self.tau
            )
        if n1 == 0:
            return
        t1k = self._outk[:n1].copy()
        t1v = self._outv[:n1].copy()
        lo2, hi2 = kernels.pair_scatter(
            t1k, t1v, model.ikeys, model.vals, self._model_pcb[a],
            self.zm, self._pc13, self._acc_even, self._acc_odd,
            0.5 * eps * eps, False,
        )
        lo3, hi3 = kernels.scale_scatter(term.ikeys, term.vals, 1.0, self._acc_even)
        lo4, hi4 = kernels.scale_scatter(t1k, t1v, eps, self._acc_even)
        self._finish_term(b, min(lo2, lo3, lo4), max(hi2, hi3, hi4))

    def _gauge_substep(self, b: int, eps: float) -> None:
        term = self.terms[b]
        if len(term.ikeys) == 0:
            return
        u1, u2 = self.variant.u1, self.variant.u2
        if u1 == 0.0 and u2 == 0.0:
            return
        f1k, f1v = self._gauge_rhs(term.ikeys, term.vals, u1, u2)
        # intermediate point y2 = y + eps*F(y)
        lo1, hi1 = kernels.scale_scatter(term.ikeys, term.vals, 1.0, self._acc_even)
        lo2, hi2 = kernels.scale_scatter(f1k, f1v, eps, self._acc_even)
        n, bad = kernels.harvest(
            self._acc_even, min(lo1, lo2), max(hi1, hi2),
            self.prune_tol, self._outk, self._outv,
        )
        self._raise_if_bad(bad)
        y2k = self._outk[:n].copy()
        y2v = self._outv[:n].copy()
        f2k, f2v = self._gauge_rhs(y2k, y2v, u1, u2)
        lo1, hi1 = kernels.scale_scatter(term.ikeys, term.vals, 1.0, self._acc_even)
        lo2, hi2 = kernels.scale_scatter(f1k, f1v, 0.5 * eps, self._acc_even)
        lo3, hi3 = kernels.scale_scatter(f2k, f2v, 0.5 * eps, self._acc_even)
        self._finish_term(b, min(lo1, lo2, lo3), max(hi1, hi2, hi3))

    def _gauge_rhs(self, yk, yv, u1, u2):
        """u1*y - u2*y^2 as fresh arrays."""
        lo = self._acc_even.shape[0]
        hi = -1
        if u2 != 0.0:
            pcy = np.bitwise_count(yk & (yk >> 1) & self.zm).astype(np.int64)
            # pair scatter of {y,y} equals 2 y^2, so scale by -u2/2
            lo, hi = kernels.pair_scatter(
                yk, yv, yk, yv, pcy, self.zm, self._pc13,
                self._acc_even, self._acc_odd, -0.5 * u2, False,
            )
        lo2, hi2 = kernels.scale_scatter(yk, yv, u1, self._acc_even)
        n, bad = kernels.harvest(
            self._acc_even, min(lo, lo2), max(hi, hi2),
            self.prune_tol, self._outk, self._outv,
        )
        self._raise_if_bad(bad)
        return self._outk[:n].copy(), self._outv[:n].copy()

    def _finish_term(self, b: int, lo: int, hi: int) -> None:
        n, bad = kernels.harvest(
            self._acc_even, lo, hi, self.prune_tol, self._outk, self._outv
        )
        self._raise_if_bad(bad)
        if self.term_cap is not None and n > self.term_cap:
            raise ResourceLimitError(
                f"term {b} grew to {n} strings (cap {self.term_cap}) "
                f"at tau = {self.tau:.6g}"
            )
        self.terms[b].ikeys = self._outk[:n].copy()
        self.terms[b].vals = self._outv[:n].copy()

    def _raise_if_bad(self, bad: bool) -> None:
        if bad:
            raise IntegrationDivergedError(
                f"nonfinite coefficients at tau = {self.tau:.6g}", tau=self.tau
            )

    def _merge_now(self) -> None:
        ck = np.concatenate([t.ikeys for t in self.terms])
        cv = np.concatenate([t.vals for t in self.terms])
        if len(ck):
            lo, hi = kernels.scale_scatter(ck, cv, 1.0, self._acc_even)
            n, bad = kernels.harvest(
                self._acc_even, lo, hi, self.prune_tol, self._outk, self._outv
            )
            self._raise_if_bad(bad)
            merged = _Term(
                self._outk[:n].copy(), self._outv[:n].copy(), 0, (0, self.length - 1)
            )
        else:
            merged = _Term(ck, cv, 0, (0, self.length - 1))
        self.terms = [merged]
        self.coupling = np.ones((1, len(self._model)), dtype=bool)
        self.merged = True
        self.set_active_width(self.active_width)

    # -- observation -----------------------------------------------------------

    def hermiticity_residual(self) -> float:
        """Exactly zero: the flow arithmetic never leaves the real algebra."""
        return 0.0

    def max_support_width(self) -> int:
        return max(
            (_max_extent_interleaved(t.ikeys, self.zm) for t in self.terms),
            default=0,
        )

    def local_terms(self) -> list[LocalTerm]:
        out = []
        for t in self.terms:
            keys = kernels.deinterleave_keys(t.ikeys, self.length)
            op = PauliSum(self.length, keys, t.vals.astype(np.complex128))
            out.append(LocalTerm(op=op, home_site=t.home, block=t.block))
        return out

    def snapshot(self) -> AdiabaticState:
        return AdiabaticState(
            tau=self.tau,
            terms=self.local_terms(),
            variant=self.variant,
            active_width=self.active_width,
            merged=self.merged,
            max_support_width=self.max_support_width(),
        )


# -- public operations on Pauli sums (small-scale, test-facing) ---------------


def rhs_naive(ht: PauliSum, h: PauliSum, tol: float = DEFAULT_PRUNE_TOL) -> PauliSum:
    """The whole-operator generator: Yh + hY."""
    return sum_combine(
        sum_multiply(ht, h, tol), 1.0, sum_multiply(h, ht, tol), 1.0, tol
    )


def rhs_per_term(
    term: LocalTerm,
    interactions: list[LocalTerm],
    active_width: int | None,
    retention: str = "containment",
    tol: float = DEFAULT_PRUNE_TOL,
) -> PauliSum:
    """Sum of primed anticommutators over the retained model terms."""
    n = term.op.n_qubits
    block = block_for(term.home_site, active_width, n)
    block_mask = sum(1 << j for j in range(block[0], block[1] + 1))
    out = PauliSum.zero(n)
    for inter in interactions:
        smask = inter.op.support_mask()
        if retention == "containment":
            keep = smask & ~block_mask == 0
        elif retention == "overlap":
            keep = smask & block_mask != 0
        else:
            raise ValueError(f"unknown retention rule {retention!r}")
        if not keep:
            continue
        out = sum_combine(out, 1.0, modified_anticommutator(term.op, inter.op, tol), 1.0, tol)
    return out


def gauge_term(op: PauliSum, u1: float, u2: float, tol: float = DEFAULT_PRUNE_TOL) -> PauliSum:
    """u1*y - u2*y^2."""
    if u1 == 0.0 and u2 == 0.0:
        return PauliSum.zero(op.n_qubits)
    return sum_combine(op, u1, sum_multiply(op, op, tol), -u2, tol)


def rk2_substep(
    state_piece: PauliSum,
    rhs: Callable[[PauliSum], PauliSum],
    eps: float,
    tol: float = DEFAULT_PRUNE_TOL,
) -> PauliSum:
    """Heun update y <- y + (eps/2) [F(y) + F(y + eps F(y))]."""
    if eps <= 0:
        raise ValueError("step size must be positive")
    k1 = rhs(state_piece)
    y2 = sum_combine(state_piece, 1.0, k1, eps, tol)
    k2 = rhs(y2)
    incr = sum_combine(k1, 0.5 * eps, k2, 0.5 * eps, tol)
    return sum_combine(state_piece, 1.0, incr, 1.0, tol)


def sweep_step(
    state: AdiabaticState,
    model: list[LocalTerm],
    eps: float,
    prune_tol: float = DEFAULT_PRUNE_TOL,
    herm_tol: float = DEFAULT_HERMITICITY_TOL,
    term_cap: int | None = None,
    retention: str = "containment",
) -> AdiabaticState:
    """Advance a snapshot by one full splitting step and return the new one."""
    length = model[0].op.n_qubits
    eng = FlowEngine(
        length,
        model,
        state.terms,
        state.variant,
        prune_tol=prune_tol,
        herm_tol=herm_tol,
        term_cap=term_cap,
        merge_coupled=False,
        retention=retention,
        merged=state.merged,
    )
    eng.tau = state.tau
    eng.set_active_width(state.active_width)
    eng.step(eps)
    return eng.snapshot()


def evolve_iter(spec: "ExperimentSpec") -> Iterator[tuple[float, AdiabaticState]]:
    """Generate (tau, snapshot) pairs at the sampling stride.

    Snapshots are materialized objects; the caller should consume them one at
    a time for large registers rather than accumulating the full list.
    """
    model_spec = ModelSpec(spec.length, spec.lambda_z)
    model = build_xxz(model_spec)
    initial = build_initial_adiabatic(spec.length)
    eng = FlowEngine(
        spec.length,
        model,
        initial,
        spec.variant,
        prune_tol=spec.prune_tol,
        herm_tol=spec.hermiticity_tol,
        term_cap=spec.term_cap,
        merge_coupled=spec.merge_coupled,
        retention=spec.retention,
    )
    n_steps = int(math.floor(spec.tau_max / spec.epsilon + 1e-9))
    eng.set_active_width(spec.schedule.active_width(0.0))
    yield 0.0, eng.snapshot()
    for k in range(1, n_steps + 1):
        width = spec.schedule.active_width((k - 1) * spec.epsilon)
        if width != eng.active_width:
            eng.set_active_width(width)
        eng.step(spec.epsilon)
        eng.tau = k * spec.epsilon
        if k % spec.stride == 0 or k == n_steps:
            yield eng.tau, eng.snapshot()


def evolve(spec: "ExperimentSpec") -> list[tuple[float, AdiabaticState]]:
    """Materialized trajectory; fine at desk scale, see evolve_iter for large runs."""
    return list(evolve_iter(spec))
