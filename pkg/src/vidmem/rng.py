"""Counter-based deterministic random source for fixture generation.

The generator is fully specified so that any implementation can reproduce
fixtures bit-for-bit:

    mix(z)   = SplitMix64 finalizer:
               z  = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9   (mod 2^64)
               z  = (z XOR (z >> 27)) * 0x94D049BB133111EB   (mod 2^64)
               return z XOR (z >> 31)
    key(seed, stream) = mix(mix(seed XOR 0xA0761D6478BD642F) + stream * GAMMA)
    word(seed, stream, i) = mix(key + (i + 1) * GAMMA)
    GAMMA = 0x9E3779B97F4A7C15

Word i of a stream is independent of how many words are requested, so any
slice of a stream can be regenerated. Derived values:

    uniform(i) = (word(i) >> 11) * 2^-53               in [0, 1)
    normal(j)  = sqrt(-2 ln(1 - u_{2j})) * cos(2 pi u_{2j+1})

Each normal consumes its own uniform pair (the sine branch of Box-Muller is
deliberately discarded), so value j is addressable without generating its
neighbors.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MULT1 = np.uint64(0xBF58476D1CE4E5B9)
_MULT2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0xA0761D6478BD642F)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MULT1
    z = (z ^ (z >> np.uint64(27))) * _MULT2
    return z ^ (z >> np.uint64(31))


class CounterRng:
    """Stateless counter RNG: every word is addressed by (seed, stream, index)."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def _key(self, stream: int) -> np.ndarray:
        base = _mix(np.asarray([self.seed], dtype=np.uint64) ^ _SEED_SALT)
        return _mix(base + np.asarray([stream], dtype=np.uint64) * _GAMMA)

    def words(self, stream: int, count: int, offset: int = 0) -> np.ndarray:
        idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
        return _mix(self._key(stream) + idx * _GAMMA)

    def uniforms(self, stream: int, count: int, offset: int = 0) -> np.ndarray:
        return (self.words(stream, count, offset) >> np.uint64(11)) * 2.0**-53

    def normals(self, stream: int, count: int, offset: int = 0) -> np.ndarray:
        """Standard normals; value j always consumes uniforms 2j and 2j+1."""
        u = self.uniforms(stream, 2 * count, 2 * offset)
        r = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
        return r * np.cos(2.0 * np.pi * u[1::2])

    def integers(self, stream: int, count: int, high: int, offset: int = 0) -> np.ndarray:
        """Integers in [0, high) by scaling uniforms; fine for fixture-sized highs."""
        return np.minimum(
            (self.uniforms(stream, count, offset) * high).astype(np.int64), high - 1
        )
