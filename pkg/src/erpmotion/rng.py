"""Counter-based deterministic random numbers.

All randomness in the toolkit flows through one named generator: a
splitmix64 keyed stream evaluated at explicit 64-bit counters, turned into
standard normals with the Box-Muller transform.  Because the value at
counter ``k`` depends only on ``(seed, k)``, draws are reproducible and
order-independent: scatter hole-filling can run under any parallel schedule
and still produce bit-identical output.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = (x + _GOLDEN) & _U64
    z = (z ^ (z >> np.uint64(30))) * _MIX1 & _U64
    z = (z ^ (z >> np.uint64(27))) * _MIX2 & _U64
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, label: str) -> int:
    """Derive a stage seed from a top-level seed and a stage label.

    The label is hashed with blake2b so the derivation is stable across
    processes (unlike Python's salted ``hash``).
    """
    tag = int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "little")
    mixed = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(tag))
    return int(mixed)


def uniforms_at(seed: int, counters: np.ndarray) -> np.ndarray:
    """Uniform float64 in [0, 1) at the given counters."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _splitmix64(c))
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normals_at(seed: int, counters: np.ndarray) -> np.ndarray:
    """Standard normal float64 at the given counters.

    Each counter consumes two sub-streams of the keyed splitmix64 sequence;
    Box-Muller (cosine branch) maps the pair to one N(0, 1) draw.
    """
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        two_c = c * np.uint64(2)
        key = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        b1 = _splitmix64(key ^ _splitmix64(two_c))
        b2 = _splitmix64(key ^ _splitmix64(two_c + np.uint64(1)))
    # u1 in (0, 1] so log() is finite; u2 in [0, 1).
    u1 = ((b1 >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (b2 >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def normals(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """First ``n`` normals of the stream starting at ``offset``."""
    return normals_at(seed, np.arange(offset, offset + n, dtype=np.uint64))
