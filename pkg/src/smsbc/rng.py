"""Seeded splitmix64 generator shared by the cipher keystream and the simulator."""

from __future__ import annotations

MASK64 = (1 << 64) - 1

GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def splitmix64_step(state: int) -> tuple[int, int]:
    """Advance one splitmix64 step; returns (new_state, 64-bit output)."""
    state = (state + GAMMA) & MASK64
    x = state
    x ^= x >> 30
    x = (x * MIX1) & MASK64
    x ^= x >> 27
    x = (x * MIX2) & MASK64
    x ^= x >> 31
    return state, x


class Splitmix64:
    """Stateful stream over splitmix64_step, seeded with a 64-bit value."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state, out = splitmix64_step(self._state)
        return out

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + self.next_u64() % (hi - lo + 1)

    def chance(self, p: float) -> bool:
        """True with probability p; always consumes one draw."""
        return self.next_u64() < int(p * 2.0**64)

    def fraction(self) -> float:
        """Uniform float in [0, 1)."""
        return self.next_u64() / 2.0**64
