"""Portable seeded random numbers.

Every random draw in the package goes through :class:`PortableRNG`, which
derives its values from the raw 64-bit output of the Philox4x64-10
counter-based generator (key = seed, counter starting at zero).  Only the raw
bit stream is taken from numpy; the transformation to uniforms, normals,
integers and permutations is spelled out here, so a given seed produces the
same numbers on every platform and numpy release.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

_MASK64 = (1 << 64) - 1
_TWO_POW_53 = float(1 << 53)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts (sha256 based)."""
    text = "\x1f".join(repr(p) if not isinstance(p, str) else p for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


class PortableRNG:
    def __init__(self, seed: int):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = seed
        key = np.array([seed & _MASK64, (seed >> 64) & _MASK64], dtype=np.uint64)
        self._bits = np.random.Philox(key=key)

    def raw(self, n: int) -> np.ndarray:
        return np.asarray(self._bits.random_raw(n), dtype=np.uint64)

    def uniform(self, n: int) -> np.ndarray:
        """Uniform doubles in [0, 1) built from the top 53 bits."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) / _TWO_POW_53

    def normal(self, size) -> np.ndarray:
        """Standard normals via Box-Muller (both outputs of each pair are used)."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        half = (n + 1) // 2
        u1 = 1.0 - self.uniform(half)  # (0, 1], keeps log finite
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.empty(2 * half)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n].reshape(shape)

    def integers(self, high: int, n: int) -> np.ndarray:
        """Integers uniform on [0, high) by floor(u * high)."""
        if high <= 0:
            raise ValueError("high must be positive")
        return np.minimum((self.uniform(n) * high).astype(np.int64), high - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of range(n)."""
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniform(n - 1)
        for idx, i in enumerate(range(n - 1, 0, -1)):
            j = min(int(u[idx] * (i + 1)), i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def choice(self, n: int, size: int) -> np.ndarray:
        """`size` distinct indices from range(n), uniformly, in draw order."""
        if size > n:
            raise ValueError(f"cannot draw {size} distinct items from {n}")
        pool = np.arange(n)
        u = self.uniform(size) if size else np.empty(0)
        for i in range(size):
            j = i + min(int(u[i] * (n - i)), n - i - 1)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:size].copy()
