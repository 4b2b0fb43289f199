"""Deterministic, portable random numbers built on the splitmix64 finalizer.

Every random draw in this package (synthetic data, weight init, shuffling)
comes from this module, so a run is reproducible from a single 64-bit seed
and the stream does not depend on numpy's generator internals.

State update (splitmix64): state advances by the 64-bit golden-ratio
constant; each output is the advanced state pushed through the xor/multiply
finalizer below. The i-th output is a pure function of (seed, i), which is
what makes the vectorized batch draws possible.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)

# FNV-1a parameters, used only to fold strings/ints into seed derivations.
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix(z: np.uint64) -> np.uint64:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First n outputs of splitmix64 for the given seed, as uint64."""
    if n < 0:
        raise ValueError("n must be >= 0")
    idx = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN)


def derive_seed(seed: int, *parts) -> int:
    """Derive a child seed from a parent seed and a label path.

    Parts may be ints or strings; the same path always yields the same
    child. Used for run seed -> cell seeds -> layer-init seeds.
    """
    acc = seed & 0xFFFFFFFFFFFFFFFF
    for part in parts:
        if isinstance(part, str):
            h = _FNV_OFFSET
            for byte in part.encode("utf-8"):
                h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
        else:
            h = int(part) & 0xFFFFFFFFFFFFFFFF
        acc = int(_mix(np.uint64(acc ^ h)))
    return acc


class SplitMix64:
    """Stateful stream over the splitmix64 sequence for one seed."""

    def __init__(self, seed: int):
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self._pos = 0

    def _take(self, n: int) -> np.ndarray:
        idx = np.arange(self._pos + 1, self._pos + n + 1, dtype=np.uint64)
        self._pos += n
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self.seed) + idx * _GOLDEN)

    def uniform(self, n: int = 1) -> np.ndarray:
        """n doubles uniform on [0, 1), using the top 53 bits."""
        return (self._take(n) >> np.uint64(11)).astype(np.float64) / float(1 << 53)

    def normal(self, n: int = 1) -> np.ndarray:
        """n standard normals via Box-Muller on consecutive uniform pairs."""
        m = (n + 1) // 2
        u = self.uniform(2 * m)
        u1 = np.maximum(u[:m], 1e-300)  # guard log(0)
        u2 = u[m:]
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
        return out[:n]

    def integers(self, low: int, high: int, n: int = 1) -> np.ndarray:
        """n ints uniform on [low, high] inclusive (modulo reduction; the
        tiny bias is irrelevant for the small ranges used here)."""
        span = high - low + 1
        if span <= 0:
            raise ValueError("high must be >= low")
        return low + (self._take(n) % np.uint64(span)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) (argsort of random keys)."""
        if n == 0:
            return np.empty(0, dtype=np.int64)
        keys = self._take(n)
        return np.argsort(keys, kind="stable").astype(np.int64)

    def uniform_range(self, low: float, high: float, n: int = 1) -> np.ndarray:
        return low + (high - low) * self.uniform(n)
