"""Benchmark model builders: XXZ chain, initial field, initial state, symmetry.

Spin convention is S = sigma/2 throughout, so the XXZ bond (j, j+1) reads
(1/4)(X_j X_{j+1} + Y_j Y_{j+1} + lambda_z Z_j Z_{j+1}) in Pauli form and the
initial single-site terms (-1)^j X_j/2 + 1/2 are projectors with eigenvalues
{0, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import PauliString, PauliSum


class ModelError(ValueError):
    """Invalid model parameters."""


@dataclass(frozen=True)
class ModelSpec:
    """Open-boundary XXZ chain parameters."""

    L: int
    lambda_z: float = 2.0

    def __post_init__(self):
        if self.L < 2:
            raise ModelError("chain length must be at least 2")


@dataclass
class LocalTerm:
    """One local summand: its operator, home site, and neighborhood block."""

    op: PauliSum
    home_site: int
    block: tuple[int, int]

    @property
    def block_width(self) -> int:
        return self.block[1] - self.block[0] + 1


def block_for(home_site: int, width: int | None, length: int) -> tuple[int, int]:
    """Centered width-w window around the home site, clipped to the chain."""
    if width is None:
        return (0, length - 1)
    half = (width - 1) // 2
    return (max(0, home_site - half), min(length - 1, home_site + half))


def _two_site_string(length: int, j: int, letter_x: bool, letter_z: bool) -> PauliString:
    bits = (1 << j) | (1 << (j + 1))
    return PauliString(length, bits if letter_x else 0, bits if letter_z else 0)


def build_xxz(spec: ModelSpec) -> list[LocalTerm]:
    """The L-1 bond terms of the open XXZ chain."""
    terms = []
    for j in range(spec.L - 1):
        op = PauliSum.from_terms(
            spec.L,
            [
                (_two_site_string(spec.L, j, True, False), 0.25),
                (_two_site_string(spec.L, j, True, True), 0.25),
                (_two_site_string(spec.L, j, False, True), 0.25 * spec.lambda_z),
            ],
        )
        terms.append(LocalTerm(op=op, home_site=j, block=(j, j + 1)))
    return terms


def build_initial_adiabatic(length: int) -> list[LocalTerm]:
    """Staggered-transverse-field terms (-1)^j X_j/2 + 1/2, one per site.

    Each term is a rank-2^{L-1} projector and separately annihilates the
    initial state.
    """
    if length < 1:
        raise ModelError("need at least one site")
    terms = []
    for j in range(length):
        sign = 1.0 if j % 2 == 0 else -1.0
        op = PauliSum.from_terms(
            length,
            [
                (PauliString(length, 1 << j, 0), 0.5 * sign),
                (PauliString(length, 0, 0), 0.5),
            ],
        )
        terms.append(LocalTerm(op=op, home_site=j, block=(j, j)))
    return terms


def initial_state(length: int) -> np.ndarray:
    """Product of X eigenstates with eigenvalue (-1)^{j+1} on qubit j.

    Annihilated by every initial-field term; unit norm. Basis convention:
    qubit j sits at bit j of the index.
    """
    if length < 1:
        raise ModelError("need at least one site")
    state = np.ones(1)
    for j in reversed(range(length)):
        amp = 1.0 if j % 2 == 1 else -1.0
        qubit = np.array([1.0, amp]) / np.sqrt(2.0)
        state = np.kron(state, qubit)
    return state


def parity_operator(length: int) -> PauliSum:
    """The global spin flip X^{otimes L}."""
    mask = (1 << length) - 1
    return PauliSum.from_terms(length, [(PauliString(length, mask, 0), 1.0)])


def total_operator(terms: list[LocalTerm]) -> PauliSum:
    """Merged sum of a list of local terms."""
    if not terms:
        raise ModelError("empty term list")
    n = terms[0].op.n_qubits
    keys = np.concatenate([t.op.keys for t in terms])
    coeffs = np.concatenate([t.op.coeffs for t in terms])
    return PauliSum(n, keys, coeffs)
