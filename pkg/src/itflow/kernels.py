"""JIT kernels for the operator-flow hot path.

Strings are packed into site-interleaved keys: bit 2j carries z_j, bit 2j+1
carries x_j.  Keys XOR like strings do, and a string supported on sites
[a, b] has a key inside [4^a, 4^{b+1}), so scatter/scan windows shrink with
operator support.  Coefficients are float64: all flow operators are Hermitian
sums with real Pauli coefficients, and the pair products below split exactly
into a real anticommutator part (even phase exponent) and an imaginary
commutator part (odd exponent), so no complex arithmetic is ever needed.

Merging uses a dense accumulator of size 4^L per register; scans output keys
in ascending order, which fixes the canonical term order and makes every run
bitwise reproducible.
"""

import numpy as np
from numba import njit

_HALF_BITS = 13
_HALF_MASK = (1 << _HALF_BITS) - 1

MAX_KERNEL_QUBITS = 13  # 4^13 * 8 B ~ 0.5 GB per accumulator


def popcount_table() -> np.ndarray:
    return np.bitwise_count(np.arange(1 << _HALF_BITS, dtype=np.uint32)).astype(
        np.int64
    )


def zmask(n_qubits: int) -> int:
    """Mask of the z (even) bit positions of an interleaved key."""
    return ((1 << (2 * n_qubits)) - 1) // 3


@njit(cache=True, nogil=True)
def _pc(pc13, v):
    return pc13[v & _HALF_MASK] + pc13[(v >> _HALF_BITS) & _HALF_MASK]


@njit(cache=True, nogil=True)
def pair_scatter(
    keys_a,
    vals_a,
    keys_b,
    vals_b,
    pcb,
    zm,
    pc13,
    acc_even,
    acc_odd,
    scale,
    want_odd,
):
    """Scatter all products of two real Hermitian sums into merge buffers.

    For string pairs (p, q) with p*q = i^k r, the contribution of the pair
    plus its transpose to {a, b} is 2(+-1) va*vb at even k (into acc_even)
    and to [a, b]/i the same at odd k (into acc_odd).  `scale` multiplies all
    contributions.  Returns the touched key window (lo, hi), or (size, -1)
    when no pair was produced.
    """
    lo = acc_even.shape[0]
    hi = -1
    for t in range(keys_b.shape[0]):
        kb = keys_b[t]
        pb = pcb[t]
        vb = vals_b[t] * 2.0 * scale
        kbx = (kb >> 1) & zm  # x mask of b, in z positions
        for i in range(keys_a.shape[0]):
            ka = keys_a[i]
            k3 = ka ^ kb
            # phase exponent of the X^x Z^z normal form, mod 4
            k = (
                _pc(pc13, ka & (ka >> 1) & zm)
                + pb
                + 2 * _pc(pc13, ka & kbx & zm)
                - _pc(pc13, k3 & (k3 >> 1) & zm)
            )
            v = vals_a[i] * vb
            if k & 2:
                v = -v
            if k & 1:
                if want_odd:
                    acc_odd[k3] += v
            else:
                acc_even[k3] += v
            if k3 < lo:
                lo = k3
            if k3 > hi:
                hi = k3
    return lo, hi


@njit(cache=True, nogil=True)
def scale_scatter(keys, vals, scale, acc):
    """acc[key] += scale * val; returns the touched window."""
    lo = acc.shape[0]
    hi = -1
    for i in range(keys.shape[0]):
        k = keys[i]
        acc[k] += scale * vals[i]
        if k < lo:
            lo = k
        if k > hi:
            hi = k
    return lo, hi


@njit(cache=True, nogil=True)
def harvest(acc, lo, hi, tol, out_keys, out_vals):
    """Extract |v| >= tol entries of acc[lo:hi+1] in key order and zero them.

    Returns (count, nonfinite_seen).  Entries below tol are discarded but
    still zeroed so the buffer stays clean.
    """
    n = 0
    bad = False
    for key in range(lo, hi + 1):
        v = acc[key]
        if v != 0.0:
            if not np.isfinite(v):
                bad = True
            if abs(v) >= tol:
                out_keys[n] = key
                out_vals[n] = v
                n += 1
            acc[key] = 0.0
    return n, bad


@njit(cache=True, nogil=True)
def max_abs_zero(acc, lo, hi):
    """Largest |v| in the window, zeroing it on the way."""
    m = 0.0
    for key in range(lo, hi + 1):
        v = acc[key]
        if v != 0.0:
            a = abs(v)
            if a > m:
                m = a
            acc[key] = 0.0
    return m


@njit(cache=True, nogil=True)
def dropped_weight(acc, lo, hi, tol):
    """Sum of |v| below tol in the window (buffer left untouched)."""
    w = 0.0
    for key in range(lo, hi + 1):
        v = acc[key]
        if v != 0.0 and abs(v) < tol:
            w += abs(v)
    return w


def interleave_keys(keys: np.ndarray, n_qubits: int) -> np.ndarray:
    """(x << n) | z packed keys -> site-interleaved keys."""
    keys = np.asarray(keys, dtype=np.int64)
    x = keys >> n_qubits
    z = keys & ((1 << n_qubits) - 1)
    out = np.zeros_like(keys)
    for j in range(n_qubits):
        out |= ((z >> j) & 1) << (2 * j)
        out |= ((x >> j) & 1) << (2 * j + 1)
    return out


def deinterleave_keys(ikeys: np.ndarray, n_qubits: int) -> np.ndarray:
    """Site-interleaved keys -> (x << n) | z packed keys."""
    ikeys = np.asarray(ikeys, dtype=np.int64)
    x = np.zeros_like(ikeys)
    z = np.zeros_like(ikeys)
    for j in range(n_qubits):
        z |= ((ikeys >> (2 * j)) & 1) << j
        x |= ((ikeys >> (2 * j + 1)) & 1) << j
    return (x << n_qubits) | z
