"""Per-snapshot and per-trajectory diagnostics.

Quantities per snapshot: infidelity to the exact imaginary-time state at the
same tau (i_tau), infidelity to the target sector ground state (i_inf), the
instantaneous gap of the full spectrum and of the symmetry sector, the
spectral norm, the ground-energy residual, and operator growth statistics.

Per trajectory: the turnover time tau_c (first global minimum of i_inf), the
adiabatic cost estimate max_tau norm/gap^2, and the eigenvalue-flow check
that excited levels obey E_i(tau) = E_i(0) exp[2 int <phi_i|H|phi_i> dtau'].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dense
from .errors import IntegrationDivergedError
from .pauli import PauliSum

CSV_COLUMNS = (
    "tau",
    "i_tau",
    "i_inf",
    "gap",
    "gap_sector",
    "norm",
    "e0_residual",
    "term_count",
    "max_support_width",
)

DEGENERACY_WINDOW = 1e-10
TRACKING_OVERLAP_MIN = 0.7


@dataclass(frozen=True)
class TrajectoryRecord:
    tau: float
    i_tau: float
    i_inf: float
    gap: float
    gap_sector: float
    norm: float
    e0_residual: float
    term_count: int
    max_support_width: int
    # diagnostics carried alongside, not CSV columns
    symmetry_residual: float = 0.0
    active_width: int | None = None

    def csv_row(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass(frozen=True)
class TrajectorySummary:
    tau_c: float
    min_i_inf: float
    max_i_tau: float
    adiabatic_cost: float
    tau_at_max_i_tau: float
    no_turnover: bool
    ordering_ok: bool

    @property
    def infinite_cost(self) -> bool:
        return math.isinf(self.adiabatic_cost)


def infidelity(a: np.ndarray, b: np.ndarray) -> float:
    """1 - |<a|b>|^2, clamped into [0, 1] against rounding."""
    if a.shape != b.shape:
        raise ValueError("states have different dimensions")
    val = 1.0 - abs(np.vdot(a, b)) ** 2
    return float(min(max(val, 0.0), 1.0))


def symmetry_residual(a: PauliSum) -> float:
    """Largest coefficient of [a, X^{otimes L}].

    The global flip is a single string, so the commutator picks up 2c from
    every term anticommuting with it (odd number of Y/Z letters) with no
    cross-term cancellation; the residual is exact and O(terms) to evaluate.
    """
    if len(a) == 0:
        return 0.0
    zs = a.keys & ((1 << a.n_qubits) - 1)
    odd = (np.bitwise_count(zs) & 1).astype(bool)
    if not np.any(odd):
        return 0.0
    return 2.0 * float(np.max(np.abs(a.coeffs[odd])))


class ReferenceSet:
    """Fixed per-run reference states: exact ITE trajectory and the target.

    Uses the flip-parity block of the initial state when the model commutes
    with the global flip (always true for the XXZ benchmark), which keeps the
    one-time eigensolve at half dimension.
    """

    def __init__(self, model_sum: PauliSum, psi0: np.ndarray, dense_cap: int = dense.DEFAULT_QUBIT_CAP):
        self.n_qubits = model_sum.n_qubits
        self.psi0 = psi0
        self.h_dense = dense.to_dense(model_sum, dense_cap)
        pval = float(np.real(np.vdot(psi0, psi0[::-1])))
        if abs(abs(pval) - 1.0) > 1e-9:
            raise ValueError("initial state has no definite flip parity")
        self.parity_value = int(round(pval))

        if dense.commutes_with_flip(model_sum):
            sec = self.parity_value
            block = dense.flip_blocks(self.h_dense.entries)[0 if sec == 1 else 1]
            import scipy.linalg

            evals, evecs = scipy.linalg.eigh(block, check_finite=False)
            self._energies = evals
            self._vectors = evecs
            self._psi0_coords = evecs.T @ dense.project_to_block(psi0, sec)
            self._sector = sec
            self._blocked = True
        else:
            decomp = dense.eig_hermitian(self.h_dense)
            self._energies = decomp.eigenvalues
            self._vectors = decomp.eigenvectors
            self._psi0_coords = decomp.eigenvectors.conj().T @ psi0
            self._sector = self.parity_value
            self._blocked = False
        self.psi_inf = self._target_state()

    def _lift(self, v: np.ndarray) -> np.ndarray:
        if self._blocked:
            return dense.lift_from_block(v, self._sector)
        return v

    def ite_state(self, tau: float) -> np.ndarray:
        """Normalized e^{-H tau} psi0 in the full register."""
        weights = np.exp(-(self._energies - self._energies[0]) * tau)
        coords = weights * self._psi0_coords
        nrm = np.linalg.norm(coords)
        if nrm == 0:
            raise FloatingPointError("imaginary-time state vanished")
        return self._lift(self._vectors @ (coords / nrm))

    def _target_state(self) -> np.ndarray:
        if self._blocked:
            e0 = self._energies[0]
            cands = np.flatnonzero(self._energies < e0 + DEGENERACY_WINDOW)
            pick = cands[0]
            if len(cands) > 1:
                pick = cands[int(np.argmax(np.abs(self._psi0_coords[cands])))]
            return self._lift(self._vectors[:, pick])
        parity = _flip_matrix(len(self.psi0))
        _, state = dense.sector_ground_state(
            self.h_dense,
            dense.DenseOperator(parity, hermitian=True),
            self._sector,
            tie_break_state=self.psi0,
            decomp=dense.SpectralDecomposition(self._energies, self._vectors),
        )
        return state

    def parity_expectation(self, v: np.ndarray) -> float:
        return float(np.real(np.vdot(v, v[::-1])))


def _flip_matrix(dim: int) -> np.ndarray:
    m = np.zeros((dim, dim))
    m[np.arange(dim)[::-1], np.arange(dim)] = 1.0
    return m


class SnapshotSpectrum:
    """Spectral data of one evolved-operator snapshot."""

    def __init__(self, total: PauliSum, psi0: np.ndarray, dense_cap: int = dense.DEFAULT_QUBIT_CAP):
        if len(total) and not np.all(np.isfinite(total.coeffs)):
            raise IntegrationDivergedError("snapshot has nonfinite coefficients")
        mat = dense.to_dense(total, dense_cap)
        if not np.all(np.isfinite(mat.entries)):
            raise IntegrationDivergedError(
                "snapshot operator overflowed during materialization"
            )
        if not mat.hermitian:
            raise dense.ContractViolationError("snapshot operator is not Hermitian")
        if dense.commutes_with_flip(total):
            spec = dense.flip_blocked_spectrum(mat.entries)
            self.energies = spec.energies
            e0 = spec.energies[0]
            cands = np.flatnonzero(spec.energies < e0 + DEGENERACY_WINDOW)
            pick = int(cands[0])
            if len(cands) > 1:
                overlaps = [abs(np.vdot(spec.vector(int(i)), psi0)) for i in cands]
                pick = int(cands[int(np.argmax(overlaps))])
            self.ground_state = spec.vector(pick)
            self.ground_sector = int(spec.sectors[pick])
            block = spec.block_energies[self.ground_sector]
            self.gap_sector = float(block[1] - block[0]) if len(block) > 1 else 0.0
        else:
            decomp = dense.eig_hermitian(mat)
            parity = dense.DenseOperator(_flip_matrix(mat.dim), hermitian=True)
            vals, vecs, pars = dense._definite_parity_levels(decomp, parity.entries)
            self.energies = vals
            e0 = vals[0]
            cands = np.flatnonzero(vals < e0 + DEGENERACY_WINDOW)
            pick = int(cands[0])
            if len(cands) > 1:
                overlaps = np.abs(vecs[:, cands].conj().T @ psi0)
                pick = int(cands[int(np.argmax(overlaps))])
            self.ground_state = vecs[:, pick]
            sec = int(round(pars[pick]))
            self.ground_sector = sec
            same = np.flatnonzero(np.abs(pars - sec) < 0.5)
            self.gap_sector = (
                float(vals[same[1]] - vals[same[0]]) if len(same) > 1 else 0.0
            )
        self.e0 = float(self.energies[0])
        self.gap = float(self.energies[1] - self.energies[0])
        self.norm = float(max(abs(self.energies[0]), abs(self.energies[-1])))


def snapshot_record(
    tau: float,
    total: PauliSum,
    refs: ReferenceSet,
    term_count: int,
    max_support_width: int,
    dense_cap: int = dense.DEFAULT_QUBIT_CAP,
    active_width: int | None = None,
) -> TrajectoryRecord:
    """Assemble the full per-snapshot diagnostic row."""
    spec = SnapshotSpectrum(total, refs.psi0, dense_cap)
    psi_tau = refs.ite_state(tau)
    return TrajectoryRecord(
        tau=tau,
        i_tau=infidelity(spec.ground_state, psi_tau),
        i_inf=infidelity(spec.ground_state, refs.psi_inf),
        gap=spec.gap,
        gap_sector=spec.gap_sector,
        norm=spec.norm,
        e0_residual=abs(spec.e0),
        term_count=term_count,
        max_support_width=max_support_width,
        symmetry_residual=symmetry_residual(total),
        active_width=active_width,
    )


def adiabatic_cost(records: list[TrajectoryRecord]) -> float:
    """max over records of norm / gap^2; +inf when any gap closes exactly."""
    if not records:
        raise ValueError("no records")
    worst = 0.0
    for r in records:
        if r.gap <= 0.0:
            return math.inf
        worst = max(worst, r.norm / r.gap**2)
    return worst


def detect_tau_c(records: list[TrajectoryRecord], stride_tau: float | None = None) -> TrajectorySummary:
    """Locate the turnover: tau_c is the first global minimum of i_inf.

    The first global maximum of i_tau is reported as a cross-check; the
    ordering flag records whether it precedes tau_c by at most one sampling
    stride (a soft diagnostic, never an error).
    """
    if len(records) < 3:
        raise ValueError("need at least 3 records to locate a turnover")
    i_inf = np.array([r.i_inf for r in records])
    i_tau = np.array([r.i_tau for r in records])
    taus = np.array([r.tau for r in records])
    k_min = int(np.argmin(i_inf))
    k_max = int(np.argmax(i_tau))
    no_turnover = k_min == len(records) - 1
    if stride_tau is None:
        stride_tau = float(np.max(np.diff(taus))) if len(taus) > 1 else 0.0
    return TrajectorySummary(
        tau_c=float(taus[k_min]),
        min_i_inf=float(i_inf[k_min]),
        max_i_tau=float(i_tau[k_max]),
        adiabatic_cost=adiabatic_cost(records),
        tau_at_max_i_tau=float(taus[k_max]),
        no_turnover=no_turnover,
        ordering_ok=bool(taus[k_max] <= taus[k_min] + stride_tau + 1e-12),
    )


# -- eigenvalue-flow verification ----------------------------------------------


@dataclass
class LevelFlowResult:
    level: int                 # index in the first snapshot's spectrum
    initial_energy: float
    tracked: bool              # survived overlap tracking to the end
    max_rel_error: float       # worst quadrature-vs-actual deviation
    rel_errors: np.ndarray     # per sampled tau (nan once tracking fails)


def _refined_eigbasis(total: PauliSum, h_mat: np.ndarray, dense_cap: int):
    """Eigenbasis with degenerate groups rotated to diagonalize H.

    Inside a degenerate eigenspace of the snapshot operator the eigenvector
    basis is arbitrary; first-order perturbation theory says the flow follows
    the basis that diagonalizes the driving Hamiltonian there.
    """
    decomp = dense.eig_hermitian(dense.to_dense(total, dense_cap))
    vals = decomp.eigenvalues
    vecs = decomp.eigenvectors.copy()
    scale = max(abs(vals[0]), abs(vals[-1]), 1.0)
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and vals[j] - vals[i] < DEGENERACY_WINDOW * scale:
            j += 1
        if j - i > 1:
            block = vecs[:, i:j]
            hb = block.conj().T @ h_mat @ block
            _, rot = np.linalg.eigh(0.5 * (hb + hb.conj().T))
            vecs[:, i:j] = block @ rot
        i = j
    return vals, vecs


def verify_eigenvalue_flow(
    trajectory: list[tuple[float, PauliSum]],
    h_sum: PauliSum,
    dense_cap: int = dense.DEFAULT_QUBIT_CAP,
) -> list[LevelFlowResult]:
    """Check E_i(tau) = E_i(0) exp[2 int <phi_i|H|phi_i> dtau'] per level.

    Levels are tracked between snapshots by maximal eigenvector overlap; a
    level whose best successive overlap drops below 0.7 (or that loses a
    greedy assignment conflict) is flagged and excluded from that point on.
    Levels starting at zero energy are compared as |E_i(tau)| / ||H_tilde||
    against the exact zero prediction.
    """
    if len(trajectory) < 2:
        raise ValueError("need at least two snapshots")
    h_mat = dense.to_dense(h_sum, dense_cap).entries
    taus = np.array([t for t, _ in trajectory])

    vals0, vecs0 = _refined_eigbasis(trajectory[0][1], h_mat, dense_cap)
    dim = len(vals0)
    norm0 = max(abs(vals0[0]), abs(vals0[-1]), 1.0)

    tracked = np.ones(dim, dtype=bool)
    cur_vecs = vecs0
    energies = np.full((len(trajectory), dim), np.nan)
    pumps = np.full((len(trajectory), dim), np.nan)
    norms = np.empty(len(trajectory))
    energies[0] = vals0
    pumps[0] = 2.0 * np.real(np.sum(vecs0.conj() * (h_mat @ vecs0), axis=0))
    norms[0] = max(abs(vals0[0]), abs(vals0[-1]))

    for s, (_, total) in enumerate(trajectory[1:], start=1):
        vals, vecs = _refined_eigbasis(total, h_mat, dense_cap)
        norms[s] = max(abs(vals[0]), abs(vals[-1]))
        overlaps = np.abs(vecs.conj().T @ cur_vecs)  # [new, old]
        new_idx = np.full(dim, -1)
        claimed = np.zeros(dim, dtype=bool)
        order = np.argsort(-np.max(overlaps, axis=0))  # strongest matches first
        for lev in order:
            if not tracked[lev]:
                continue
            best = int(np.argmax(overlaps[:, lev]))
            if overlaps[best, lev] < TRACKING_OVERLAP_MIN or claimed[best]:
                tracked[lev] = False
                continue
            claimed[best] = True
            new_idx[lev] = best
        nxt = np.zeros_like(cur_vecs)
        for lev in range(dim):
            if tracked[lev]:
                col = new_idx[lev]
                energies[s, lev] = vals[col]
                pump = 2.0 * np.real(np.vdot(vecs[:, col], h_mat @ vecs[:, col]))
                pumps[s, lev] = pump
                nxt[:, lev] = vecs[:, col]
        cur_vecs = nxt

    results = []
    for lev in range(dim):
        good = ~np.isnan(energies[:, lev])
        rel = np.full(len(trajectory), np.nan)
        if np.sum(good) >= 2:
            tg = taus[good]
            integ = np.concatenate(
                [[0.0], np.cumsum(0.5 * np.diff(tg) * (pumps[good, lev][:-1] + pumps[good, lev][1:]))]
            )
            if abs(vals0[lev]) < 1e-12 * norm0:
                # zero levels stay zero; report the residual against the norm
                rel[good] = np.abs(energies[good, lev]) / np.maximum(norms[good], 1.0)
            else:
                pred = vals0[lev] * np.exp(integ)
                rel[good] = np.abs(pred - energies[good, lev]) / np.maximum(
                    np.abs(energies[good, lev]), 1e-300
                )
        results.append(
            LevelFlowResult(
                level=lev,
                initial_energy=float(vals0[lev]),
                tracked=bool(tracked[lev]),
                max_rel_error=float(np.nanmax(rel)) if np.any(~np.isnan(rel)) else math.nan,
                rel_errors=rel,
            )
        )
    return results
