"""The doubling map, digit extraction, and the induced (jump) map.

Digits are read off the binary expansion adaptively: the digit of a point
is pinned as soon as its dyadic enclosure fits inside one constancy cell
(1/(m+1), 1/m] of x -> floor(1/x).  Reading peeks; the only consumption
is one explicit shift per orbit step, which keeps the bookkeeping of
return times exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .bitstream import DEFAULT_MAX_BITS, BitPoint
from .errors import ResolutionError


def shift(p: BitPoint) -> BitPoint:
    """One application of the doubling map: drop the leading bit."""
    return p.shifted(1)


def chi_of_point(p: BitPoint, max_bits: int = DEFAULT_MAX_BITS) -> int:
    """floor(1/x) for the point behind the bit stream.

    Peeks bits until the enclosing interval [v/2^k, (v+1)/2^k) lies inside
    one constancy cell (1/(m+1), 1/m].  Since floor(1/x) is non-increasing,
    its value on the enclosure runs from floor(2^k/v) at the closed lower
    end down to floor(2^k/(v+1)) just below the open upper end; the digit
    is pinned exactly when those two agree.  Never consumes bits.
    """
    if max_bits < 2:
        raise ValueError("max_bits must be >= 2")
    v = p.prefix_int(2)
    k = 2
    while True:
        if v > 0:
            d = (1 << k) // (v + 1)
            if d == (1 << k) // v:
                return d
        if k >= max_bits:
            break
        v = (v << 1) | _bit_at(p, k)
        k += 1
    raise ResolutionError(
        f"digit unresolved after {max_bits} bits (prefix straddles a cell boundary)")


def _bit_at(p: BitPoint, i: int) -> int:
    """Bit at offset i past the current position, without consuming."""
    return p.shifted(i).peek_bits(1)[0]


def chi_q(x: Fraction) -> int:
    """Rational oracle: floor(1/x) on (0,1)."""
    if not (0 < x < 1):
        raise ValueError("x must be in (0,1)")
    return x.denominator // x.numerator


def tau_q(x: Fraction) -> Fraction:
    """Rational oracle for the doubling map."""
    y = 2 * x
    return y - 1 if y >= 1 else y


def phi_q(x: Fraction) -> int:
    """Rational oracle for the first-exit time to [1/2, 1)."""
    if not (0 < x < 1):
        raise ValueError("x must be in (0,1)")
    n = 1
    while x < Fraction(1, 2):
        x = 2 * x
        n += 1
    return n


def tau_b_q(x: Fraction) -> Fraction:
    """Rational oracle for the induced map: -1 + 2^{n+1} x on [2^-n-1, 2^-n)."""
    if not (0 < x < 1):
        raise ValueError("x must be in (0,1)")
    y = tau_q(x)
    while x < Fraction(1, 2):
        x = y
        y = tau_q(x)
    return y


def phi_of_point(p: BitPoint, max_bits: int = DEFAULT_MAX_BITS) -> int:
    """First-exit time to [1/2,1): one plus the number of leading 0 bits."""
    return 1 + p.leading_zeros(max_bits)


@dataclass
class OrbitState:
    """Bookkeeping for an orbit advanced by plain and induced steps."""

    point: BitPoint
    step: int = 0
    induced_step: int = 0
    phi_total: int = 0


def induced_step(state: OrbitState,
                 max_bits: int = DEFAULT_MAX_BITS) -> tuple[int, OrbitState]:
    """Apply the jump map once: shift past the first 1 bit.

    Returns (phi, new state).  On rational inputs this agrees with the
    affine form -1 + 2^{n+1} x on [2^{-n-1}, 2^{-n}).
    """
    phi = phi_of_point(state.point, max_bits)
    return phi, OrbitState(
        point=state.point.shifted(phi),
        step=state.step + phi,
        induced_step=state.induced_step + 1,
        phi_total=state.phi_total + phi,
    )


@dataclass(frozen=True)
class DigitRecord:
    """One digit of the orbit, with its induced-excursion marker."""

    index: int            # 1-based orbit index n
    a: int                # digit value, >= 1
    is_induced_start: bool  # True at indices 1, phi_1+1, phi_2+1, ...


def digit_stream(seed: int, n: int,
                 max_bits: int = DEFAULT_MAX_BITS) -> list[DigitRecord]:
    """Digits a_1..a_n of the orbit of the seeded point.

    Induced-start marks sit exactly where a fresh excursion of the jump
    map begins (the previous position was in [1/2,1), equivalently the
    previous bit was 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    p = BitPoint(seed)
    out = []
    prev_bit = 1  # index 1 starts the first excursion
    for i in range(1, n + 1):
        try:
            a = chi_of_point(p, max_bits)
        except ResolutionError as e:
            raise ResolutionError(f"digit a_{i}: {e}") from e
        out.append(DigitRecord(index=i, a=a, is_induced_start=bool(prev_bit)))
        prev_bit = p.peek_bits(1)[0]
        p = shift(p)
    return out


def verify_digit_halving(records: list[DigitRecord]) -> int:
    """Count violations of a_{i+j} = floor(a_i / 2^j) for j <= floor(log2 a_i).

    The contract is zero on every orbit; a positive count is a hard bug.
    """
    defects = 0
    a = [r.a for r in records]
    for i, r in enumerate(a):
        if r < 2:
            continue
        span = r.bit_length() - 1  # floor(log2 r)
        for j in range(1, span + 1):
            if i + j >= len(a):
                break
            if a[i + j] != r >> j:
                defects += 1
    return defects


def verify_beta_indexing(seed: int, n: int,
                         max_bits: int = DEFAULT_MAX_BITS) -> int:
    """Count k <= n with beta_k != a_{phi_{k-1}+1} on one bit stream.

    beta_k is the digit seen by the induced orbit at its k-th step; the
    right-hand side re-reads the same digit from the plain orbit.  The
    contract is zero.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    state = OrbitState(BitPoint(seed))
    defects = 0
    for _ in range(n):
        beta = chi_of_point(state.point, max_bits)
        # plain-orbit digit at index phi_{k-1}+1 on the same stream
        plain = chi_of_point(BitPoint(seed).shifted(state.phi_total), max_bits)
        if beta != plain:
            defects += 1
        _, state = induced_step(state, max_bits)
    return defects
