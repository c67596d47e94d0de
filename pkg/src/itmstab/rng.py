"""Portable 64-bit random streams (SplitMix64).

The generator is small enough to re-implement in any language, so link sets
and synthetic terrain can be reproduced bit for bit outside Python.

Generator, all arithmetic modulo 2**64::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

A uniform real in [0, 1) is the top 53 bits of one output divided by 2**53.

Independent streams are derived from a master seed and a small integer
offset: the stream's initial state is ``mix64(seed + offset * STREAM_STRIDE)``,
where ``mix64`` is the output function above applied to its argument
directly (no state increment).  ``STREAM_OFFSETS`` lists the offsets used by
this package.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
STREAM_STRIDE = 0xD1342543DE82EF95

STREAM_OFFSETS = {
    # link generation, one stream per drawn quantity
    "tx_lat": 1,
    "tx_lon": 2,
    "rx_lat": 3,
    "rx_lon": 4,
    "tx_h": 5,
    "rx_h": 6,
    # synthetic terrain
    "hills_center_lat": 101,
    "hills_center_lon": 102,
    "hills_radius": 103,
    "hills_height": 104,
    "hills_mesa": 105,
}


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) / 9007199254740992.0

    def uniform_range(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()


def stream(seed: int, name: str | int) -> SplitMix64:
    """Independent generator for one named quantity under a master seed."""
    offset = STREAM_OFFSETS[name] if isinstance(name, str) else int(name)
    return SplitMix64(mix64((seed + offset * STREAM_STRIDE) & MASK64))
