"""Exact dense linear algebra at desk scale.

Basis convention: computational index s carries qubit j at bit j, so
X_j|s> = |s ^ (1<<j)> and Z_j|s> = (-1)^{(s>>j)&1} |s>.

Materialization of a Pauli sum groups terms by their X-mask; the Z-dependence
of each group is a Walsh-Hadamard transform, so an L-qubit sum with any number
of terms densifies in O(4^L * L) instead of O(terms * 2^L).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ResourceLimitError
from .pauli import PauliSum

DEFAULT_QUBIT_CAP = 12
HERMITIAN_ATOL = 1e-10


class ContractViolationError(ValueError):
    """An operation was called outside its stated preconditions."""


@dataclass
class DenseOperator:
    """A dense matrix tagged with its Hermiticity status."""

    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("entries must be a square matrix")
        self.entries = a
        if self.hermitian:
            resid = np.max(np.abs(a - a.conj().T))
            if resid >= HERMITIAN_ATOL:
                raise ContractViolationError(
                    f"hermitian flag set but max|A - A^dag| = {resid:.3e}"
                )

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass
class SpectralDecomposition:
    """Ascending eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _fwht_axis1(a: np.ndarray) -> np.ndarray:
    """In-place fast Walsh-Hadamard transform along axis 1 (natural order)."""
    rows, n = a.shape
    h = 1
    while h < n:
        b = a.reshape(rows, n // (2 * h), 2, h)
        t0 = b[:, :, 0, :] + b[:, :, 1, :]
        t1 = b[:, :, 0, :] - b[:, :, 1, :]
        b[:, :, 0, :] = t0
        b[:, :, 1, :] = t1
        h *= 2
    return a


def to_dense(a: PauliSum, max_qubits: int = DEFAULT_QUBIT_CAP) -> DenseOperator:
    """Exact matrix of a Pauli sum.

    Deterministic given the canonical term order. Register sizes above
    `max_qubits` are refused with a resource error.
    """
    n = a.n_qubits
    if n > max_qubits:
        raise ResourceLimitError(
            f"register of {n} qubits exceeds the dense cap of {max_qubits}"
        )
    dim = 1 << n
    mask = dim - 1
    xs = (a.keys >> n).astype(np.int64)
    zs = (a.keys & mask).astype(np.int64)
    phase_exp = np.bitwise_count(xs & zs).astype(np.int64) & 3

    real_ok = len(a) == 0 or (
        not np.any(phase_exp & 1) and not np.any(a.coeffs.imag)
    )
    dtype = np.float64 if real_ok else np.complex128

    g = np.zeros((dim, dim), dtype=dtype)
    if real_ok:
        # i^{pc(x&z)} is +-1 for even-Y strings
        vals = a.coeffs.real * np.where(phase_exp & 2, -1.0, 1.0)
    else:
        vals = a.coeffs * (1j) ** phase_exp
    g[xs, zs] = vals

    w = _fwht_axis1(g)
    idx = np.arange(dim)
    m = w[np.bitwise_xor.outer(idx, idx), idx[None, :]]
    herm = bool(np.max(np.abs(m - m.conj().T)) < HERMITIAN_ATOL) if len(a) else True
    return DenseOperator(m, hermitian=herm)


def eig_hermitian(a: DenseOperator) -> SpectralDecomposition:
    """Full eigendecomposition of a Hermitian operator, ascending order."""
    if not a.hermitian:
        raise ContractViolationError("eig_hermitian requires the hermitian flag")
    vals, vecs = scipy.linalg.eigh(a.entries, check_finite=False)
    return SpectralDecomposition(vals, vecs)


def spectral_norm(a: DenseOperator) -> float:
    """Largest eigenvalue magnitude."""
    if not a.hermitian:
        raise ContractViolationError("spectral_norm requires the hermitian flag")
    vals = scipy.linalg.eigvalsh(a.entries, check_finite=False)
    return float(np.max(np.abs(vals))) if len(vals) else 0.0


def imaginary_time_state(
    h: DenseOperator,
    psi0: np.ndarray,
    tau: float,
    decomp: SpectralDecomposition | None = None,
) -> np.ndarray:
    """Normalized e^{-H tau} psi0 via the spectral representation.

    Eigenvalues are shifted by E_min before exponentiation; the shift cancels
    in the normalized state and prevents overflow at large tau.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if decomp is None:
        decomp = eig_hermitian(h)
    amps = decomp.eigenvectors.conj().T @ psi0
    weights = np.exp(-(decomp.eigenvalues - decomp.eigenvalues[0]) * tau)
    out = decomp.eigenvectors @ (weights * amps)
    nrm = np.linalg.norm(out)
    if nrm == 0:
        raise FloatingPointError("state vanished under imaginary time projection")
    return out / nrm


def _definite_parity_levels(
    decomp: SpectralDecomposition,
    parity: np.ndarray,
    degeneracy_window: float = 1e-10,
):
    """Rotate degenerate groups to definite parity.

    Returns (energies, vectors, parities) with vectors as columns; the input
    order is preserved except inside degenerate groups, which are reordered by
    parity eigenvalue.
    """
    vals = decomp.eigenvalues
    vecs = decomp.eigenvectors.copy()
    parities = np.empty(len(vals))
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and vals[j] - vals[i] < degeneracy_window:
            j += 1
        block = vecs[:, i:j]
        pb = parity @ block
        pmat = block.conj().T @ pb
        if j - i == 1:
            parities[i] = pmat[0, 0].real
        else:
            pe, pv = np.linalg.eigh(pmat)
            vecs[:, i:j] = block @ pv
            parities[i:j] = pe
        i = j
    return vals, vecs, parities


def sector_ground_state(
    h: DenseOperator,
    parity: DenseOperator,
    sector: int,
    tie_break_state: np.ndarray | None = None,
    decomp: SpectralDecomposition | None = None,
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of H restricted to one parity sector.

    Ties inside a 1e-10 energy window are broken by maximal overlap with
    `tie_break_state`, then by first index.
    """
    if sector not in (+1, -1):
        raise ValueError("sector must be +1 or -1")
    _probe_commutation(h.entries, parity.entries)
    if decomp is None:
        decomp = eig_hermitian(h)
    vals, vecs, pars = _definite_parity_levels(decomp, parity.entries)
    in_sector = np.abs(pars - sector) < 0.5
    if not np.any(in_sector):
        raise ContractViolationError(f"no levels found in parity sector {sector:+d}")
    idx = np.flatnonzero(in_sector)
    e_min = vals[idx].min()
    cands = idx[vals[idx] < e_min + 1e-10]
    pick = cands[0]
    if tie_break_state is not None and len(cands) > 1:
        overlaps = np.abs(vecs[:, cands].conj().T @ tie_break_state)
        pick = cands[int(np.argmax(overlaps))]
    return float(vals[pick]), vecs[:, pick]


def _probe_commutation(h: np.ndarray, p: np.ndarray, n_probes: int = 3) -> None:
    """Verify [H, P] ~ 0 on random probe vectors (cheaper than a matmul)."""
    rng = np.random.default_rng(7)
    scale = max(np.max(np.abs(h)), 1e-300) * h.shape[0]
    for _ in range(n_probes):
        v = rng.standard_normal(h.shape[0])
        resid = np.linalg.norm(h @ (p @ v) - p @ (h @ v))
        if resid > 1e-10 * scale * np.linalg.norm(v):
            raise ContractViolationError(
                f"operators do not commute: probe residual {resid:.3e}"
            )


# -- bit-flip parity blocks ----------------------------------------------------
#
# The global-X-flip symmetry pairs each basis state s with its complement
# mask - s and has no fixed points, so the Hilbert space splits into two
# equal blocks spanned by (|s> +- |mask - s>)/sqrt(2) with s < 2^{L-1}.
# Operators commuting with the flip are block diagonal there, which halves
# the eigensolve dimension (8x fewer flops) for the trajectory diagnostics.


def commutes_with_flip(a: PauliSum) -> bool:
    """Exact string-level test: every term needs an even number of Y/Z letters."""
    if len(a) == 0:
        return True
    zs = a.keys & ((1 << a.n_qubits) - 1)
    return not np.any(np.bitwise_count(zs) & 1)


def flip_blocks(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project a flip-symmetric matrix onto the (+, -) flip-parity blocks."""
    dim = m.shape[0]
    half = dim // 2
    s = np.arange(half)
    st = (dim - 1) - s
    a = m[np.ix_(s, s)]
    d = m[np.ix_(st, st)]
    b = m[np.ix_(s, st)]
    c = m[np.ix_(st, s)]
    return 0.5 * (a + d + b + c), 0.5 * (a + d - b - c)


def lift_from_block(v: np.ndarray, sector: int) -> np.ndarray:
    """Embed a block vector back into the full register."""
    half = len(v)
    out = np.empty(2 * half, dtype=v.dtype)
    out[:half] = v
    out[half:] = sector * v[::-1]
    return out / np.sqrt(2.0)


def project_to_block(v: np.ndarray, sector: int) -> np.ndarray:
    """Component of a full vector inside one flip-parity block."""
    half = len(v) // 2
    return (v[:half] + sector * v[half:][::-1]) / np.sqrt(2.0)


@dataclass
class FlipBlockedSpectrum:
    """Joint spectrum of both flip-parity blocks of a symmetric operator."""

    energies: np.ndarray      # ascending over both blocks
    sectors: np.ndarray       # +-1 per level
    block_vectors: dict       # sector -> eigenvector columns (block coords)
    block_energies: dict      # sector -> ascending energies of that block
    block_index: np.ndarray   # per level, column in its block

    def vector(self, i: int) -> np.ndarray:
        sec = int(self.sectors[i])
        return lift_from_block(
            self.block_vectors[sec][:, self.block_index[i]], sec
        )


def flip_blocked_spectrum(m: np.ndarray) -> FlipBlockedSpectrum:
    plus, minus = flip_blocks(m)
    ep, vp = scipy.linalg.eigh(plus, check_finite=False)
    em, vm = scipy.linalg.eigh(minus, check_finite=False)
    energies = np.concatenate([ep, em])
    sectors = np.concatenate([np.ones(len(ep)), -np.ones(len(em))])
    index = np.concatenate([np.arange(len(ep)), np.arange(len(em))])
    order = np.argsort(energies, kind="stable")
    return FlipBlockedSpectrum(
        energies=energies[order],
        sectors=sectors[order].astype(int),
        block_vectors={+1: vp, -1: vm},
        block_energies={+1: ep, -1: em},
        block_index=index[order].astype(int),
    )
