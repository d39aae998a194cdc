"""Bit-stream generator and dyadic interval tests."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trimlab.bitstream import (
    DEFAULT_MAX_BITS,
    BitPoint,
    DyadicInterval,
    bit_block,
    draw_bits,
    enclosing_interval,
    mix64,
)

# Reference outputs of the underlying counter generator for seed 0,
# matching the published splitmix64 test vector.
SPLITMIX64_SEED0 = (0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F)


def test_mix64_reference_vector():
    for j, want in enumerate(SPLITMIX64_SEED0):
        assert bit_block(0, j) == want


def test_mix64_range_and_determinism():
    for z in (0, 1, 2**64 - 1, 0xDEADBEEF):
        v = mix64(z)
        assert 0 <= v < 2**64
        assert mix64(z) == v


def test_bit_block_distinct_seeds_differ():
    assert bit_block(1, 0) != bit_block(2, 0)
    assert bit_block(1, 0) != bit_block(1, 1)


def test_peek_bits_msb_first():
    p = BitPoint(0)
    bits = p.peek_bits(64)
    assert len(bits) == 64
    v = 0
    for b in bits:
        assert b in (0, 1)
        v = (v << 1) | b
    assert v == SPLITMIX64_SEED0[0]


def test_peek_does_not_consume():
    p = BitPoint(12345)
    first = p.peek_bits(100)
    again = p.peek_bits(100)
    assert first == again
    assert p.consumed == 0


def test_prefix_int_matches_bits():
    p = BitPoint(7)
    for k in (1, 5, 64, 130):
        bits = p.peek_bits(k)
        v = 0
        for b in bits:
            v = (v << 1) | b
        assert p.prefix_int(k) == v


def test_shifted_drops_leading_bits():
    p = BitPoint(99)
    bits = p.peek_bits(40)
    q = p.shifted(7)
    assert q.consumed == 7
    assert q.peek_bits(33) == bits[7:]


def test_draw_bits_advances():
    p = BitPoint(3)
    bits = p.peek_bits(10)
    drawn = draw_bits(p, 10)
    assert drawn == bits


def test_leading_zeros_consistent_with_bits():
    for seed in range(50):
        p = BitPoint(seed)
        j = p.leading_zeros()
        bits = p.peek_bits(j + 1)
        assert all(b == 0 for b in bits[:j])
        assert bits[j] == 1


def test_dyadic_interval_contains():
    iv = DyadicInterval(v=3, k=3)  # [3/8, 4/8)
    assert iv.contains(Fraction(3, 8))
    assert iv.contains(Fraction(7, 16))
    assert not iv.contains(Fraction(1, 2))
    assert not iv.contains(Fraction(1, 4))


def test_dyadic_interval_nesting():
    outer = DyadicInterval(v=1, k=1)  # [1/2, 1)
    inner = DyadicInterval(v=3, k=2)  # [3/4, 1)
    assert outer.contains_interval(inner)
    assert not inner.contains_interval(outer)


def test_enclosing_interval_refines():
    p = BitPoint(42)
    for k in range(1, 30):
        outer = enclosing_interval(p, k)
        inner = enclosing_interval(p, k + 1)
        assert outer.contains_interval(inner)


def test_enclosing_interval_prefix_value():
    p = BitPoint(5)
    iv = enclosing_interval(p, 12)
    assert iv.k == 12
    assert iv.v == p.prefix_int(12)


@given(st.integers(min_value=0, max_value=2**64 - 1),
       st.integers(min_value=1, max_value=300))
@settings(max_examples=50, deadline=None)
def test_prefix_int_prefix_property(seed, k):
    p = BitPoint(seed)
    assert p.prefix_int(k + 1) >> 1 == p.prefix_int(k)


@given(st.integers(min_value=0, max_value=2**64 - 1),
       st.integers(min_value=0, max_value=200),
       st.integers(min_value=1, max_value=100))
@settings(max_examples=50, deadline=None)
def test_shift_commutes_with_peek(seed, steps, k):
    p = BitPoint(seed)
    assert p.shifted(steps).peek_bits(k) == p.peek_bits(steps + k)[steps:]


def test_default_max_bits_sane():
    assert DEFAULT_MAX_BITS >= 1024
