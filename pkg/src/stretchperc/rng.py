"""Counter-based random streams.

Every random quantity in the package is a pure function of a master seed, a
purpose tag and integer coordinates, so that results never depend on the order
in which trials or edges are visited.
"""
from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps silently in numpy
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def tag_value(tag: str | int) -> int:
    """Map a purpose tag (string or int) to a 64-bit integer."""
    if isinstance(tag, (int, np.integer)):
        return int(tag) & MASK64
    digest = hashlib.blake2b(tag.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(master: int, *keys: str | int) -> int:
    """Derive a child seed as hash(master, key_1, ..., key_n)."""
    h = np.array([master & MASK64], dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix(h + _GOLDEN)
        for key in keys:
            h = _mix((h ^ np.uint64(tag_value(key))) + _GOLDEN)
    return int(h[0])


def hash_u64(seed, *coords) -> np.ndarray:
    """Vectorised hash of broadcastable integer arrays under a seed.

    ``seed`` may itself be an array (one seed per trial).
    """
    arrays = [np.asarray(c).astype(np.int64).view(np.uint64) for c in coords]
    seed = np.asarray(seed, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix(seed + _GOLDEN)
        for a in arrays:
            h = _mix((h ^ a) + _GOLDEN)
    return h


def uniforms(seed, *coords) -> np.ndarray:
    """Uniform variates in the open interval (0, 1), keyed by coordinates."""
    h = hash_u64(seed, *coords)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def generator(master: int, *keys: str | int) -> np.random.Generator:
    """A Philox generator for bulk i.i.d. draws keyed by (master, keys)."""
    return np.random.Generator(np.random.Philox(key=derive_seed(master, *keys)))


def trial_seeds(master: int, tag: str, trials: int, start: int = 0) -> np.ndarray:
    """Per-trial seeds hash(master, tag, t) for t in [start, start + trials)."""
    base = derive_seed(master, tag)
    return hash_u64(np.uint64(base), np.arange(start, start + trials))
