"""Deterministic fair-coin bit streams and dyadic enclosures.

A point of [0,1) is represented by the (conceptually infinite) binary
expansion 0.b0 b1 b2 ... where bit i is a pure function of a 64-bit seed
and the index i.  Bits are produced in 64-bit blocks by a counter-based
(splitmix-style) generator, so bit i is computable without generating any
earlier bit.  Points produced this way have no finite binary expansion
with probability one, which is exactly the full-measure set on which all
digit identities of the doubling map hold.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ResolutionError

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

#: Default cap on how many bits an adaptive query may inspect.  The chance
#: that a fair-coin stream needs anywhere near this many is 2**-4096.
DEFAULT_MAX_BITS = 4096


def mix64(z: int) -> int:
    """splitmix64 finalizer: a bijective scramble of a 64-bit word."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def bit_block(seed: int, index: int) -> int:
    """64-bit block `index` of the stream for `seed` (counter mode)."""
    return mix64((seed + (index + 1) * _GAMMA) & _MASK64)


class _BlockCache:
    """Lazily materialized blocks, shared by all shifts of one stream."""

    __slots__ = ("seed", "_blocks")

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._blocks: dict[int, int] = {}

    def block(self, index: int) -> int:
        b = self._blocks.get(index)
        if b is None:
            b = bit_block(self.seed, index)
            self._blocks[index] = b
        return b

    def bit(self, index: int) -> int:
        # bits are read MSB-first inside each block
        return (self.block(index >> 6) >> (63 - (index & 63))) & 1


@dataclass(frozen=True)
class DyadicInterval:
    """The half-open interval [v/2^k, (v+1)/2^k) inside [0,1)."""

    v: int
    k: int

    def __post_init__(self):
        if self.k < 1 or not (0 <= self.v < (1 << self.k)):
            raise ValueError(f"invalid dyadic interval v={self.v} k={self.k}")

    @property
    def lower(self) -> Fraction:
        return Fraction(self.v, 1 << self.k)

    @property
    def upper(self) -> Fraction:
        return Fraction(self.v + 1, 1 << self.k)

    @property
    def width(self) -> Fraction:
        return Fraction(1, 1 << self.k)

    def contains(self, x: Fraction) -> bool:
        return self.lower <= x < self.upper

    def contains_interval(self, other: "DyadicInterval") -> bool:
        return self.lower <= other.lower and other.upper <= self.upper


class BitPoint:
    """A point of [0,1) as a seeded lazy bit stream.

    `consumed` counts the bits already shifted away by the doubling map;
    the represented value is the expansion read from index `consumed`
    onward.  Reading never mutates: `peek_bits` / `prefix_int` return the
    same answer every time.  Shifting returns a new BitPoint sharing the
    block cache, so independent orbit workers must each own their points.
    """

    __slots__ = ("_cache", "consumed")

    def __init__(self, seed: int, consumed: int = 0, _cache: _BlockCache | None = None):
        self._cache = _cache if _cache is not None else _BlockCache(seed)
        self.consumed = consumed

    @property
    def seed(self) -> int:
        return self._cache.seed

    def peek_bits(self, k: int) -> list[int]:
        """Bits at stream indices consumed..consumed+k-1, without consuming."""
        if k < 1:
            raise ValueError("k must be >= 1")
        base = self.consumed
        return [self._cache.bit(base + i) for i in range(k)]

    def prefix_int(self, k: int) -> int:
        """The first k unconsumed bits packed into an integer (MSB first)."""
        v = 0
        base = self.consumed
        for i in range(k):
            v = (v << 1) | self._cache.bit(base + i)
        return v

    def shifted(self, steps: int = 1) -> "BitPoint":
        """The point with `steps` leading bits discarded (2^steps x mod 1)."""
        if steps < 0:
            raise ValueError("steps must be >= 0")
        return BitPoint(0, self.consumed + steps, self._cache)

    def leading_zeros(self, max_bits: int = DEFAULT_MAX_BITS) -> int:
        """Length of the all-zero prefix; error if no 1 bit shows up."""
        base = self.consumed
        for i in range(max_bits):
            if self._cache.bit(base + i):
                return i
        raise ResolutionError(f"zero prefix: no 1 bit in the first {max_bits} bits")

    def __repr__(self):
        return f"BitPoint(seed={self.seed:#018x}, consumed={self.consumed})"


def draw_bits(p: BitPoint, k: int) -> list[int]:
    """Read k bits from the current position (cached, never consumes)."""
    return p.peek_bits(k)


def enclosing_interval(p: BitPoint, k: int) -> DyadicInterval:
    """Dyadic interval of width 2^-k certainly containing the point."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return DyadicInterval(p.prefix_int(k), k)
