"""SplitMix64 streams and per-image seed derivation.

Every random decision in the toolkit is drawn from a :class:`SeedStream`
derived from ``(global seed, content id, purpose)``. Streams are counter
based, so block draws and scalar draws produce the same sequence.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_INV_2_53 = 1.0 / (1 << 53)

PURPOSES = ("sites", "flags", "styles", "noise", "phase", "shuffle")


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int) -> int:
    """First output of a SplitMix64 generator seeded with ``seed``."""
    return mix64(seed + GAMMA)


def fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


class SeedStream:
    """A SplitMix64 sequence starting from a 64-bit state."""

    def __init__(self, state: int) -> None:
        self.seed = int(state) & MASK64
        self._counter = 0

    def __repr__(self) -> str:
        return f"SeedStream(seed={self.seed:#018x}, drawn={self._counter})"

    def next_u64(self) -> int:
        self._counter += 1
        return mix64(self.seed + self._counter * GAMMA)

    def u64_block(self, size: int) -> np.ndarray:
        k = np.arange(self._counter + 1, self._counter + size + 1, dtype=np.uint64)
        self._counter += size
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + k * np.uint64(GAMMA)
        return _mix64_array(z)

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniforms(self, shape: int | tuple[int, ...]) -> np.ndarray:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        size = int(np.prod(shape, dtype=np.int64))
        bits = self.u64_block(size) >> np.uint64(11)
        return (bits.astype(np.float64) * _INV_2_53).reshape(shape)

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def permutation(self, n: int) -> list[int]:
        """Uniform random permutation of ``range(n)`` (Fisher-Yates)."""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def sample_without_replacement(self, pool_size: int, k: int) -> list[int]:
        """``k`` distinct indices from ``range(pool_size)`` (partial Fisher-Yates)."""
        if k > pool_size:
            raise ValueError("k exceeds pool size")
        pool = list(range(pool_size))
        for i in range(k):
            j = i + self.below(pool_size - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def image_key(global_seed: int, content_id: str) -> int:
    return (int(global_seed) & MASK64) ^ fnv1a64(content_id)


def derive_seed(global_seed: int, content_id: str, purpose: str) -> SeedStream:
    """Stream for one (image, purpose) pair.

    The state is ``splitmix64(global ^ fnv1a64(content_id) ^ fnv1a64(purpose))``.
    """
    return SeedStream(splitmix64(image_key(global_seed, content_id) ^ fnv1a64(purpose)))
