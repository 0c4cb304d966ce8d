"""Counter-based keyed random numbers (Philox4x64-10).

Every random quantity in the package is a pure function of a key and a
counter, so point fields can be materialized lazily in any order and path
streams can be evaluated in parallel without sharing generator state.

The block function matches ``numpy.random.Philox`` bit for bit; the test
suite checks this.
"""
from __future__ import annotations

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# key domains: keep field cells and path streams on disjoint keys
DOMAIN_FIELD = 0x5F1E1D
DOMAIN_STREAM = 0x57EA
DOMAIN_SPLIT = 0x5B117


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    p0 = a_lo * b_lo
    p1 = a_lo * b_hi
    p2 = a_hi * b_lo
    p3 = a_hi * b_hi
    mid = (p0 >> _S32) + (p1 & _LO32) + (p2 & _LO32)
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + (mid >> _S32)
    return hi, a * b


@nb.njit(cache=True)
def philox_block(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on a 256-bit counter with a 128-bit key."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def to_unit(x):
    """Map a 64-bit word to a double in [0, 1)."""
    return (x >> _S11) * _INV53


@nb.njit(cache=True, inline="always")
def as_word(v):
    """Two's-complement view of a signed integer as an unsigned word."""
    return np.uint64(np.int64(v))


def make_key(seed: int, domain: int) -> tuple[np.uint64, np.uint64]:
    """Build the 128-bit Philox key for a seed and a key domain."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(domain)


@nb.njit(cache=True)
def stream_uniforms(k0, k1, path_id, step, tag):
    """Four independent uniforms for step ``step`` of stream ``path_id``."""
    w0, w1, w2, w3 = philox_block(as_word(path_id), as_word(step), as_word(tag),
                                  np.uint64(0), k0, k1)
    return to_unit(w0), to_unit(w1), to_unit(w2), to_unit(w3)


@nb.njit(cache=True)
def split_word(seed_word, index):
    """Derived 64-bit seed for trial ``index`` of a master seed.

    The splitter is one Philox block with key ``(seed, DOMAIN_SPLIT)`` and
    counter ``(index, 0, 0, 0)``; its first output word is the trial seed.
    """
    w0, _, _, _ = philox_block(as_word(index), np.uint64(0), np.uint64(0), np.uint64(0),
                               seed_word, np.uint64(DOMAIN_SPLIT))
    return w0


def trial_seed(seed: int, index: int) -> int:
    """Python-side view of :func:`split_word`."""
    k0, _ = make_key(seed, DOMAIN_SPLIT)
    return int(split_word(k0, index))
