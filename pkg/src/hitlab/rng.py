"""Counter-based random streams for reproducible, order-independent Monte Carlo."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    # splitmix64 finalizer (bijective on 64 bits); used to derive child stream ids
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


@dataclass(frozen=True)
class RngStream:
    """Name of one reproducible random stream, a (seed, stream_id) pair.

    Streams are backed by the Philox counter-based bit generator, keyed by
    the 128-bit concatenation of seed and stream_id.  The draws of a stream
    are a pure function of (seed, stream_id, draw index): results do not
    depend on scheduling, worker count, or the order in which streams are
    consumed.  Distinct pairs yield statistically independent streams.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
            if not 0 <= int(value) < 2**64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {value}")
            object.__setattr__(self, name, int(value))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at draw 0 of this stream."""
        key = (self.seed << 64) | self.stream_id
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RngStream":
        """Deterministically derived child stream, e.g. one per replicate chunk."""
        if index < 0:
            raise ValueError("substream index must be non-negative")
        child = _splitmix64((self.stream_id + (index + 1) * _GOLDEN) & _MASK64)
        return RngStream(self.seed, child)
