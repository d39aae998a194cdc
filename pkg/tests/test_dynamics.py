"""Doubling-map dynamics and digit identity tests."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trimlab.bitstream import BitPoint, enclosing_interval
from trimlab.dynamics import (
    DigitRecord,
    OrbitState,
    chi_of_point,
    chi_q,
    digit_stream,
    induced_step,
    phi_of_point,
    phi_q,
    shift,
    tau_b_q,
    tau_q,
    verify_beta_indexing,
    verify_digit_halving,
)
from trimlab.errors import ResolutionError

F = Fraction


def _rand_x(rng, denom=10**6):
    # odd numerators avoid finite binary expansions
    return F(rng.randrange(1, denom, 2), denom)


def test_chi_q_known_values():
    assert chi_q(F(1, 2)) == 2
    assert chi_q(F(2, 3)) == 1
    assert chi_q(F(1, 3)) == 3
    assert chi_q(F(1, 100)) == 100
    assert chi_q(F(3, 10)) == 3


def test_tau_q_doubles_mod_one():
    assert tau_q(F(1, 3)) == F(2, 3)
    assert tau_q(F(2, 3)) == F(1, 3)
    assert tau_q(F(7, 10)) == F(2, 5)


def test_phi_q_exit_time():
    # phi = 1 + number of leading zero bits = steps until [1/2, 1)
    assert phi_q(F(2, 3)) == 1
    assert phi_q(F(1, 3)) == 2
    assert phi_q(F(1, 5)) == 3
    rng = random.Random(2)
    for _ in range(100):
        x = _rand_x(rng)
        y, steps = x, 0
        while y < F(1, 2):
            y = tau_q(y)
            steps += 1
        assert phi_q(x) == steps + 1


def test_tau_b_q_is_iterated_tau():
    rng = random.Random(3)
    for _ in range(100):
        x = _rand_x(rng)
        y = x
        for _ in range(phi_q(x)):
            y = tau_q(y)
        assert tau_b_q(x) == y


def test_tau_b_q_affine_on_levels():
    # on J_n = [2^-n-1, 2^-n) the jump map is x -> 2^{n+1} x - 1
    rng = random.Random(4)
    for _ in range(100):
        n = rng.randint(0, 12)
        x = F(1, 1 << (n + 1)) + F(rng.randrange(1, 1 << 11, 2), 1 << (n + 13))
        assert tau_b_q(x) == (1 << (n + 1)) * x - 1


def test_chi_phi_relation():
    # phi = floor(log2 chi) + 1
    rng = random.Random(5)
    for _ in range(200):
        x = _rand_x(rng)
        assert phi_q(x) == chi_q(x).bit_length()


def test_chi_of_point_constant_on_enclosure():
    # the stream digit must equal the rational digit of any point in a
    # sufficiently fine enclosing dyadic interval
    for seed in range(120):
        p = BitPoint(seed)
        a = chi_of_point(p)
        iv = enclosing_interval(p, 96)
        mid = F(2 * iv.v + 1, 1 << (iv.k + 1))
        assert chi_q(mid) == a


def test_shift_matches_tau_on_enclosure():
    for seed in range(60):
        p = BitPoint(seed)
        q = shift(p)
        iv = enclosing_interval(p, 80)
        mid = F(2 * iv.v + 1, 1 << (iv.k + 1))
        assert chi_q(tau_q(mid)) == chi_of_point(q)


def test_phi_of_point_matches_leading_zeros():
    for seed in range(100):
        p = BitPoint(seed)
        assert phi_of_point(p) == p.leading_zeros() + 1


def test_chi_of_point_resolution_error():
    # a stream starting 10... is ambiguous between digits 1 and 2 after
    # two bits; a tiny budget must fail loudly, not wrongly
    p = BitPoint(1)
    assert p.peek_bits(2) == [1, 0]
    with pytest.raises(ResolutionError):
        chi_of_point(p, max_bits=2)


def test_digit_stream_matches_pointwise_orbit():
    for seed in (0, 1, 77, 123456):
        recs = digit_stream(seed, 300)
        assert len(recs) == 300
        p = BitPoint(seed)
        for k, rec in enumerate(recs):
            assert rec.index == k + 1
            assert rec.a == chi_of_point(p)
            p = shift(p)


def test_digit_stream_induced_marks():
    recs = digit_stream(9, 500)
    # the first digit always starts an excursion; each excursion has
    # length phi = bit_length of its head digit
    assert recs[0].is_induced_start
    k = 0
    while k < len(recs):
        head = recs[k].a
        span = head.bit_length()
        for off in range(1, span):
            if k + off < len(recs):
                assert not recs[k + off].is_induced_start
        if k + span < len(recs):
            assert recs[k + span].is_induced_start
        k += span


def test_digit_halving_within_excursions():
    for seed in (0, 5, 900):
        recs = digit_stream(seed, 800)
        assert verify_digit_halving(recs) == 0
        # oracle restated: a_{i+j} = floor(a_i / 2^j) inside an excursion
        for k, rec in enumerate(recs):
            if not rec.is_induced_start:
                continue
            for j in range(1, rec.a.bit_length()):
                if k + j < len(recs):
                    assert recs[k + j].a == rec.a >> j


def test_verify_digit_halving_flags_corruption():
    recs = digit_stream(4, 200)
    bad = [DigitRecord(r.index, r.a + (3 if i == 50 else 0), r.is_induced_start)
           for i, r in enumerate(recs)]
    assert verify_digit_halving(bad) > 0


def test_beta_indexing_zero_defects():
    for seed in (0, 17, 31337):
        assert verify_beta_indexing(seed, 400) == 0


def test_induced_step_chains():
    state = OrbitState(BitPoint(21))
    phis = []
    for _ in range(50):
        phi, state = induced_step(state)
        phis.append(phi)
    assert state.phi_total == sum(phis)
    assert state.induced_step == 50
    # oracle: each excursion lasts bit_length(head digit) steps
    recs = digit_stream(21, state.phi_total + 64)
    heads = [r.a for r in recs if r.is_induced_start]
    assert phis == [h.bit_length() for h in heads[:50]]


@given(st.integers(min_value=1, max_value=10**9))
@settings(max_examples=100, deadline=None)
def test_chi_q_floor_property(num):
    x = F(2 * num - 1, 2 * 10**9)  # odd/even: x in (0, 1)
    a = chi_q(x)
    assert F(1, a + 1) < x <= F(1, a) or (F(1, a + 1) <= x < F(1, a))
    assert a == int(1 / x)
