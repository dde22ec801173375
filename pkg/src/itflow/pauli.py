"""Exact algebra over real/complex linear combinations of Pauli strings.

An n-qubit Pauli string is encoded symplectically by two bitmasks (x, z),
qubit j at bit j:

    (x_j, z_j) = (0,0) -> I,  (1,0) -> X,  (0,1) -> Z,  (1,1) -> Y

No phase is stored in the string itself; the operator identified with the
bit pair is P(x,z) = i^{popcount(x & z)} X^x Z^z, which is Hermitian.
Products of strings are strings up to a fourth-root-of-unity phase that is
folded into coefficients.

Sums are kept canonical: distinct strings, keys sorted ascending, terms with
|coefficient| below the prune tolerance removed.  The packed key of a string
is (x << n) | z, which limits sums to n <= 31 qubits (far beyond the dense
backend's reach).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

DEFAULT_PRUNE_TOL = 1e-12

_PHASES = np.array([1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j])

_LETTERS = "IXZY"  # index = x + 2*z


class DimensionMismatchError(ValueError):
    """Operands act on different numbers of qubits."""


def _check_same_n(a, b) -> None:
    if a.n_qubits != b.n_qubits:
        raise DimensionMismatchError(
            f"operands act on {a.n_qubits} and {b.n_qubits} qubits"
        )


@dataclass(frozen=True)
class PauliString:
    """A single Pauli word in symplectic (x, z) bitmask form."""

    n_qubits: int
    x: int
    z: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        top = 1 << self.n_qubits
        if not (0 <= self.x < top and 0 <= self.z < top):
            raise ValueError("bitmask outside qubit register")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Build from a word over {I,X,Y,Z}; qubit 0 is the leftmost letter."""
        x = z = 0
        for j, c in enumerate(label):
            if c == "X":
                x |= 1 << j
            elif c == "Z":
                z |= 1 << j
            elif c == "Y":
                x |= 1 << j
                z |= 1 << j
            elif c != "I":
                raise ValueError(f"invalid Pauli letter {c!r}")
        return cls(len(label), x, z)

    @property
    def key(self) -> int:
        return (self.x << self.n_qubits) | self.z

    @classmethod
    def from_key(cls, n_qubits: int, key: int) -> "PauliString":
        return cls(n_qubits, key >> n_qubits, key & ((1 << n_qubits) - 1))

    def label(self) -> str:
        out = []
        for j in range(self.n_qubits):
            out.append(_LETTERS[((self.x >> j) & 1) + 2 * ((self.z >> j) & 1)])
        return "".join(out)

    def weight(self) -> int:
        """Number of non-identity sites."""
        return (self.x | self.z).bit_count()

    def support(self) -> tuple[int, ...]:
        m = self.x | self.z
        return tuple(j for j in range(self.n_qubits) if (m >> j) & 1)

    def extent(self) -> int:
        """hi - lo + 1 over the support; 0 for the identity."""
        m = self.x | self.z
        if m == 0:
            return 0
        return m.bit_length() - (m & -m).bit_length() + 1

    def __str__(self) -> str:
        return self.label()


@dataclass(frozen=True)
class PhasedString:
    """A Pauli string together with a phase in {+1, +i, -1, -i}."""

    phase: complex
    string: PauliString

    def __post_init__(self):
        if self.phase not in (1, 1j, -1, -1j):
            raise ValueError(f"phase {self.phase!r} is not a fourth root of unity")


def _phase_exponent(x1: int, z1: int, x2: int, z2: int) -> int:
    # p*q = i^k * r with r = (x1^x2, z1^z2); k from the X^x Z^z normal form.
    x3 = x1 ^ x2
    z3 = z1 ^ z2
    k = (
        (x1 & z1).bit_count()
        + (x2 & z2).bit_count()
        + 2 * (z1 & x2).bit_count()
        - (x3 & z3).bit_count()
    )
    return k % 4


def mul_strings(p: PauliString, q: PauliString) -> PhasedString:
    """Product of two strings: p*q = phase * r."""
    _check_same_n(p, q)
    k = _phase_exponent(p.x, p.z, q.x, q.z)
    r = PauliString(p.n_qubits, p.x ^ q.x, p.z ^ q.z)
    return PhasedString(complex(_PHASES[k]), r)


def commutes_strings(p: PauliString, q: PauliString) -> bool:
    """True iff the symplectic form <x_p.z_q> + <z_p.x_q> vanishes mod 2."""
    _check_same_n(p, q)
    return ((p.x & q.z).bit_count() + (p.z & q.x).bit_count()) % 2 == 0


class PauliSum:
    """Canonical linear combination of Pauli strings on a fixed register.

    Internally an ascending int64 key array plus complex128 coefficients.
    Instances are immutable; all combinators return new sums.
    """

    __slots__ = ("n_qubits", "keys", "coeffs", "dropped_weight")

    def __init__(self, n_qubits: int, keys=None, coeffs=None, *, _canonical=False):
        if n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if n_qubits > 31:
            raise ValueError("packed-key representation supports at most 31 qubits")
        self.n_qubits = n_qubits
        if keys is None:
            keys = np.empty(0, dtype=np.int64)
            coeffs = np.empty(0, dtype=np.complex128)
        keys = np.asarray(keys, dtype=np.int64)
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if keys.shape != coeffs.shape or keys.ndim != 1:
            raise ValueError("keys and coeffs must be matching 1-d arrays")
        if not _canonical:
            keys, coeffs = _merge_terms(keys, coeffs, 0.0)
        self.keys = keys
        self.coeffs = coeffs
        self.dropped_weight = 0.0
        self.keys.setflags(write=False)
        self.coeffs.setflags(write=False)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, n_qubits: int) -> "PauliSum":
        return cls(n_qubits)

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, [0], [coeff], _canonical=True)

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[tuple[PauliString, complex]]) -> "PauliSum":
        keys, coeffs = [], []
        for s, c in terms:
            if s.n_qubits != n_qubits:
                raise DimensionMismatchError("term register size mismatch")
            keys.append(s.key)
            coeffs.append(c)
        return cls(n_qubits, keys, coeffs)

    @classmethod
    def from_label_terms(cls, terms: dict[str, complex]) -> "PauliSum":
        labels = list(terms)
        if not labels:
            raise ValueError("cannot infer register size from empty dict")
        n = len(labels[0])
        return cls.from_terms(
            n, ((PauliString.from_label(l), terms[l]) for l in labels)
        )

    # -- basic queries --------------------------------------------------------

    def __len__(self) -> int:
        return len(self.keys)

    def is_empty(self, tol: float = 0.0) -> bool:
        if len(self.keys) == 0:
            return True
        return bool(np.max(np.abs(self.coeffs)) <= tol)

    def terms(self) -> Iterator[tuple[PauliString, complex]]:
        for k, c in zip(self.keys, self.coeffs):
            yield PauliString.from_key(self.n_qubits, int(k)), complex(c)

    def coefficient(self, s: PauliString) -> complex:
        idx = np.searchsorted(self.keys, s.key)
        if idx < len(self.keys) and self.keys[idx] == s.key:
            return complex(self.coeffs[idx])
        return 0.0

    def support_mask(self) -> int:
        mask = (1 << self.n_qubits) - 1
        m = 0
        for k in self.keys:
            k = int(k)
            m |= (k >> self.n_qubits) | (k & mask)
        return m

    def support(self) -> tuple[int, ...]:
        m = self.support_mask()
        return tuple(j for j in range(self.n_qubits) if (m >> j) & 1)

    def max_extent(self) -> int:
        """Largest single-string support extent in the sum."""
        mask = (1 << self.n_qubits) - 1
        best = 0
        for k in self.keys:
            k = int(k)
            m = (k >> self.n_qubits) | (k & mask)
            if m:
                best = max(best, m.bit_length() - (m & -m).bit_length() + 1)
        return best

    def scaled(self, factor: complex) -> "PauliSum":
        if factor == 0:
            return PauliSum.zero(self.n_qubits)
        return PauliSum(self.n_qubits, self.keys, self.coeffs * factor, _canonical=True)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return (
            self.n_qubits == other.n_qubits
            and np.array_equal(self.keys, other.keys)
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __repr__(self) -> str:
        parts = [f"({c:.6g})*{s}" for s, c in list(self.terms())[:6]]
        if len(self) > 6:
            parts.append(f"... [{len(self)} terms]")
        return "PauliSum(" + " + ".join(parts) + ")" if parts else "PauliSum(0)"

    # -- textual round-trip ----------------------------------------------------

    def to_text(self) -> str:
        """One term per line: '<coeff_re> <coeff_im> <word>', qubit 0 leftmost."""
        lines = []
        for s, c in self.terms():
            lines.append(f"{c.real!r} {c.imag!r} {s.label()}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> "PauliSum":
        keys, coeffs, n = [], [], n_qubits
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            re_s, im_s, word = ln.split()
            if n is None:
                n = len(word)
            elif len(word) != n:
                raise ValueError("inconsistent word length in text form")
            keys.append(PauliString.from_label(word).key)
            coeffs.append(float(re_s) + 1j * float(im_s))
        if n is None:
            raise ValueError("empty text and no register size given")
        return cls(n, keys, coeffs)


# -- canonicalization ---------------------------------------------------------


def _merge_terms(keys: np.ndarray, coeffs: np.ndarray, tol: float):
    """Sort, merge duplicates, drop |c| <= tol (and exact zeros)."""
    if len(keys) == 0:
        return keys.astype(np.int64), coeffs.astype(np.complex128)
    uk, inv = np.unique(keys, return_inverse=True)
    re = np.bincount(inv, weights=coeffs.real, minlength=len(uk))
    im = np.bincount(inv, weights=coeffs.imag, minlength=len(uk))
    merged = re + 1j * im
    mag = np.abs(merged)
    keep = mag > tol if tol > 0 else mag > 0
    return uk[keep].astype(np.int64), merged[keep]


# -- combinators ---------------------------------------------------------------


def sum_combine(
    a: PauliSum,
    alpha: complex,
    b: PauliSum,
    beta: complex,
    tol: float = DEFAULT_PRUNE_TOL,
) -> PauliSum:
    """Canonical alpha*a + beta*b."""
    _check_same_n(a, b)
    keys = np.concatenate([a.keys, b.keys])
    coeffs = np.concatenate([a.coeffs * alpha, b.coeffs * beta])
    k, c = _merge_terms(keys, coeffs, tol)
    return PauliSum(a.n_qubits, k, c, _canonical=True)


def _product_arrays(n: int, ka, ca, kb, cb):
    """All pairwise products, unmerged: (keys, coeffs) flat arrays."""
    mask = (1 << n) - 1
    xa, za = ka >> n, ka & mask
    xb, zb = kb >> n, kb & mask
    x3 = xa[:, None] ^ xb[None, :]
    z3 = za[:, None] ^ zb[None, :]
    k = (
        np.bitwise_count(xa & za)[:, None].astype(np.int64)
        + np.bitwise_count(xb & zb)[None, :]
        + 2 * np.bitwise_count(za[:, None] & xb[None, :]).astype(np.int64)
        - np.bitwise_count(x3 & z3).astype(np.int64)
    ) & 3
    keys = ((x3 << n) | z3).ravel()
    coeffs = (ca[:, None] * cb[None, :] * _PHASES[k]).ravel()
    return keys, coeffs


def sum_multiply(a: PauliSum, b: PauliSum, tol: float = DEFAULT_PRUNE_TOL) -> PauliSum:
    """Full distributive product a*b with phases folded into coefficients."""
    _check_same_n(a, b)
    if len(a) == 0 or len(b) == 0:
        return PauliSum.zero(a.n_qubits)
    keys, coeffs = _product_arrays(a.n_qubits, a.keys, a.coeffs, b.keys, b.coeffs)
    k, c = _merge_terms(keys, coeffs, tol)
    return PauliSum(a.n_qubits, k, c, _canonical=True)


def commutator(a: PauliSum, b: PauliSum, tol: float = DEFAULT_PRUNE_TOL) -> PauliSum:
    """ab - ba, canonical and pruned."""
    _check_same_n(a, b)
    if len(a) == 0 or len(b) == 0:
        return PauliSum.zero(a.n_qubits)
    k1, c1 = _product_arrays(a.n_qubits, a.keys, a.coeffs, b.keys, b.coeffs)
    k2, c2 = _product_arrays(a.n_qubits, b.keys, b.coeffs, a.keys, a.coeffs)
    k, c = _merge_terms(np.concatenate([k1, k2]), np.concatenate([c1, -c2]), tol)
    return PauliSum(a.n_qubits, k, c, _canonical=True)


def anticommutator(a: PauliSum, b: PauliSum, tol: float = DEFAULT_PRUNE_TOL) -> PauliSum:
    """ab + ba, canonical and pruned; Hermitian for Hermitian inputs."""
    _check_same_n(a, b)
    if len(a) == 0 or len(b) == 0:
        return PauliSum.zero(a.n_qubits)
    k1, c1 = _product_arrays(a.n_qubits, a.keys, a.coeffs, b.keys, b.coeffs)
    k2, c2 = _product_arrays(a.n_qubits, b.keys, b.coeffs, a.keys, a.coeffs)
    k, c = _merge_terms(np.concatenate([k1, k2]), np.concatenate([c1, c2]), tol)
    return PauliSum(a.n_qubits, k, c, _canonical=True)


def modified_anticommutator(
    a: PauliSum, b: PauliSum, tol: float = DEFAULT_PRUNE_TOL
) -> PauliSum:
    """{a,b} if a and b fail to commute as whole operators, else the empty sum.

    Commutation is decided by building ab - ba and testing emptiness after
    pruning, never string by string.
    """
    comm = commutator(a, b, tol)
    if comm.is_empty(tol):
        return PauliSum.zero(a.n_qubits)
    return anticommutator(a, b, tol)


def prune(a: PauliSum, tol: float) -> PauliSum:
    """Drop terms with |coefficient| < tol; dropped weight on the result."""
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    if len(a) == 0 or tol == 0:
        return a
    mag = np.abs(a.coeffs)
    keep = mag >= tol
    out = PauliSum(a.n_qubits, a.keys[keep], a.coeffs[keep], _canonical=True)
    out.dropped_weight = float(np.sum(mag[~keep]))
    return out


def hermiticity_residual(a: PauliSum) -> float:
    """max over terms of |Im(coefficient)|; 0 for the empty sum."""
    if len(a) == 0:
        return 0.0
    return float(np.max(np.abs(a.coeffs.imag)))


def real_part(a: PauliSum, tol: float = 0.0) -> PauliSum:
    """Discard imaginary coefficient parts (after the caller checked them)."""
    if len(a) == 0:
        return a
    c = a.coeffs.real.astype(np.complex128)
    keep = np.abs(c) > tol
    return PauliSum(a.n_qubits, a.keys[keep], c[keep], _canonical=True)


def norm_inf(a: PauliSum) -> float:
    """Largest coefficient magnitude."""
    if len(a) == 0:
        return 0.0
    return float(np.max(np.abs(a.coeffs)))


def frobenius_norm(a: PauliSum) -> float:
    """Hilbert-Schmidt norm / 2^{n/2}: sqrt(sum |c|^2) since strings are orthonormal."""
    if len(a) == 0:
        return 0.0
    return float(math.sqrt(np.sum(np.abs(a.coeffs) ** 2)))
