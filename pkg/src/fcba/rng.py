"""Counter-based random streams.

Every random quantity in a trial is a pure function of (seed, tag, index), so a
configuration of ``2n`` particles shares its first ``n`` particles with the
configuration of ``n`` particles, and a collision's outcome depends only on the
two particles involved, not on the order in which events were processed.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)

TAG_SPACING = 1
TAG_SPECIES = 2
TAG_REACTION = 3


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorised :func:`splitmix64` over a uint64 array (wrapping arithmetic)."""
    z = x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z += np.uint64(GOLDEN)
        z ^= z >> np.uint64(30)
        z *= np.uint64(_M1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def substream_seed(seed: int, tag: int) -> int:
    return splitmix64((seed & MASK64) ^ splitmix64(tag))


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Seed of trial ``trial_index``; depends on nothing but the two integers."""
    return splitmix64(splitmix64(master_seed & MASK64) ^ ((trial_index + 1) * GOLDEN & MASK64))


def to_unit(h: int) -> float:
    """Map a 64-bit hash to [0, 1)."""
    return (h >> 11) * _INV53


def pair_uniform(seed: int, key_left: int, key_right: int) -> float:
    """Uniform draw attached to the collision of two particles (left, right)."""
    return to_unit(splitmix64(splitmix64(seed ^ key_left) ^ key_right))


def child_key(key_left: int, key_right: int) -> int:
    """Key of the blockade generated by coalescing ``key_left`` and ``key_right``."""
    return splitmix64(key_left ^ splitmix64(key_right ^ GOLDEN)) | (1 << 63)


def index_uniforms(seed: int, tag: int, indices: np.ndarray, open_interval: bool = False) -> np.ndarray:
    """Uniforms for integer indices (may be negative) under stream ``tag``."""
    base = np.uint64(substream_seed(seed, tag))
    h = splitmix64_array(indices.astype(np.int64).view(np.uint64) ^ base)
    u = (h >> np.uint64(11)).astype(np.float64)
    if open_interval:
        u += 0.5
    return u * _INV53


class KeyedStream:
    """Collision randomness keyed by particle identity.

    ``uniform(k1, k2)`` is the single draw consumed by the collision of the
    particles with keys ``k1`` (left) and ``k2`` (right).
    """

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.reaction_seed = substream_seed(self.seed, TAG_REACTION)

    def uniform(self, key_left: int, key_right: int) -> float:
        return pair_uniform(self.reaction_seed, key_left, key_right)

    def __repr__(self) -> str:
        return f"KeyedStream(seed={self.seed})"


class SequenceStream:
    """Plays back a fixed list of uniforms in event order; used to rig outcomes."""

    def __init__(self, draws):
        self._draws = list(draws)
        self._i = 0

    def uniform(self, key_left: int, key_right: int) -> float:
        u = self._draws[self._i % len(self._draws)]
        self._i += 1
        return u
