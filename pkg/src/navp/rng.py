"""Deterministic 64-bit PRNG: splitmix64 seeding feeding xoshiro256**.

Scene generation and channel noise must reproduce byte-for-byte across
runs, platforms, and language ports, so the generator is pinned here
instead of delegating to library RNGs whose stream may change between
versions. The exact update equations are spelled out in PROTOCOL.md.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_STREAM_SALT = 0xA24BAED4963EE407  # odd constant decorrelating indexed streams


def mix64(z: int) -> int:
    """splitmix64 finalizer: full-avalanche 64-bit mix."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def derive_seed(seed: int, label: str, index: int = 0) -> int:
    """Derive an independent stream seed from a run seed, a label, and an index."""
    return mix64((seed ^ fnv1a64(label) ^ (index * _STREAM_SALT)) & _MASK64)


class SplitMix64:
    """state += gamma; output = mix64(state)."""

    __slots__ = ("_state",)

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _SPLITMIX_GAMMA) & _MASK64
        return mix64(self._state)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** seeded through SplitMix64, per the reference construction."""

    __slots__ = ("_s",)

    def __init__(self, seed: int) -> None:
        sm = SplitMix64(seed)
        self._s = [sm.next_u64() for _ in range(4)]
        if not any(self._s):  # the all-zero state is invalid
            self._s[0] = _SPLITMIX_GAMMA

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo reduction, documented as such."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        return self.next_u64() % n
