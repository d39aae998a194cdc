"""Digit observables, excursion sums, cell envelopes, and their exact means.

The cell partition at resolution m splits each dyadic level
J_j = [2^-j-1, 2^-j) into 2^{m-1} equal cells

    J_{j,i}^m = [1/2^j - (i+1)/2^{j+m}, 1/2^j - i/2^{j+m}),  i < 2^{m-1},

of measure 2^-(j+m).  The envelope values y and z frame the excursion sum
eta on each cell; truncated envelopes clamp the level index by
floor(log2 r).

The raw z value is not a pointwise lower bound: eta equals
2*chi - popcount(chi) exactly, and on a level-j cell the popcount can
reach j+1 while z only budgets for the linear term, leaving an overshoot
of up to s2(chi) - j + 1 <= 2 (realized defects reach 6/5).  Shifting z
down by ETA_LOWER_SHIFT = 2 restores an exact sandwich, clamped case
included, because z increases in j and the truncated excursion restarts
at a level >= the clamp index with the same cell offset i.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .bitstream import DEFAULT_MAX_BITS, BitPoint
from .dynamics import chi_of_point, chi_q, phi_of_point, shift
from .stepfn import StepFunction

# Amount the raw z envelope must drop to lie below eta everywhere; see
# the module docstring for the popcount argument giving the bound 2.
ETA_LOWER_SHIFT = 2


def chi_tilde_1(x: Fraction) -> Fraction:
    """The smooth companion 1/x of the digit observable."""
    x = Fraction(x)
    if not (0 < x < 1):
        raise ValueError("x must be in (0,1)")
    return 1 / x


def truncate(a: int, r) -> int:
    """a if a <= r else 0 (per-term truncation)."""
    if a < 1:
        raise ValueError("digit must be >= 1")
    return a if a <= r else 0


def floor_log2(r) -> int:
    """floor(log2 r) for rational r >= 1."""
    r = Fraction(r)
    if r < 1:
        raise ValueError("r must be >= 1")
    return (r.numerator // r.denominator).bit_length() - 1


def eta(p: BitPoint, max_bits: int = DEFAULT_MAX_BITS) -> int:
    """Sum of digits over one excursion of the jump map."""
    phi = phi_of_point(p, max_bits)
    total = 0
    q = p
    for _ in range(phi):
        total += chi_of_point(q, max_bits)
        q = shift(q)
    return total


def eta_trunc(p: BitPoint, r, max_bits: int = DEFAULT_MAX_BITS) -> int:
    """Excursion sum with each digit truncated at level r."""
    phi = phi_of_point(p, max_bits)
    total = 0
    q = p
    for _ in range(phi):
        total += truncate(chi_of_point(q, max_bits), r)
        q = shift(q)
    return total


def eta_head_bounds(chi: int) -> tuple[int, int]:
    """Sharp two-sided frame of the excursion sum by its head digit.

    eta = 2*chi - popcount(chi) with 1 <= popcount <= floor(log2 chi)+1,
    so 2*chi - floor(log2 chi) - 1 <= eta <= 2*chi - 1; both ends are
    attained (all-ones heads on the left, powers of two on the right).
    """
    if chi < 1:
        raise ValueError("head digit must be >= 1")
    return 2 * chi - (chi.bit_length() - 1) - 1, 2 * chi - 1


@dataclass(frozen=True)
class CellIndex:
    """Cell J_{j,i}^m of the resolution-m partition."""

    j: int
    i: int
    m: int

    def __post_init__(self):
        if self.m < 1 or self.j < 0 or not (0 <= self.i < (1 << (self.m - 1))):
            raise ValueError(f"invalid cell (j={self.j}, i={self.i}, m={self.m})")

    @property
    def lower(self) -> Fraction:
        return Fraction((1 << self.m) - self.i - 1, 1 << (self.j + self.m))

    @property
    def upper(self) -> Fraction:
        return Fraction((1 << self.m) - self.i, 1 << (self.j + self.m))

    @property
    def measure(self) -> Fraction:
        return Fraction(1, 1 << (self.j + self.m))


def cell_of(p: BitPoint, m: int, max_bits: int = DEFAULT_MAX_BITS) -> CellIndex:
    """The unique cell containing the point; j is the leading-zero count.

    The first j+m bits pin the cell: with prefix v, the cell offset is
    i = 2^m - 1 - v (the top retained bit of v is the leading 1).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    j = p.leading_zeros(max_bits)
    v = p.shifted(j).prefix_int(m)  # bits j..j+m-1, leading bit is 1
    return CellIndex(j=j, i=(1 << m) - 1 - v, m=m)


@dataclass(frozen=True)
class EnvelopeValues:
    """Upper (y) and lower (z) envelope values on one cell."""

    y: Fraction
    z: Fraction


def envelope_values(c: CellIndex) -> EnvelopeValues:
    """y_{j,i} = 2^{j+m+1}/(2^m-i-1),  z_{j,i} = 2^{j+m+1}/(2^m-i) - j - 1."""
    num = Fraction(1 << (c.j + c.m + 1))
    y = num / ((1 << c.m) - c.i - 1)
    z = num / ((1 << c.m) - c.i) - c.j - 1
    return EnvelopeValues(y=y, z=z)


def _envelope_y(j: int, i: int, m: int) -> Fraction:
    return Fraction(1 << (j + m + 1), (1 << m) - i - 1)


def _envelope_z(j: int, i: int, m: int) -> Fraction:
    # j = -1 is reachable through the truncation clamp when r < 2
    return Fraction(1 << (j + m + 1), (1 << m) - i) - j - 1


def vm_eval(p: BitPoint, m: int, r, max_bits: int = DEFAULT_MAX_BITS) -> Fraction:
    """Upper envelope of the truncated excursion sum: y at level min{j, floor(log2 r)}."""
    c = cell_of(p, m, max_bits)
    return _envelope_y(min(c.j, floor_log2(r)), c.i, m)


def wm_eval(p: BitPoint, m: int, r, max_bits: int = DEFAULT_MAX_BITS,
            shift: int = ETA_LOWER_SHIFT) -> Fraction:
    """Lower envelope of the truncated excursion sum.

    Evaluates z at level min{j, floor(log2 r)-1} minus the shift that
    makes it a true pointwise bound.  Pass shift=0 for the raw clamped z
    value, which overshoots eta^r on cells with popcount-heavy heads.
    """
    c = cell_of(p, m, max_bits)
    return _envelope_z(min(c.j, floor_log2(r) - 1), c.i, m) - shift


def expect_chi_trunc(r) -> Fraction:
    """E of the digit truncated at r: sum_{k=1}^{floor r} 1/(k+1), exact."""
    r = Fraction(r)
    if r < 0:
        raise ValueError("r must be >= 0")
    top = r.numerator // r.denominator
    return sum((Fraction(1, k + 1) for k in range(1, top + 1)), Fraction(0))


def expect_chi_trunc_approx(r: float) -> float:
    """Float companion of expect_chi_trunc for levels far beyond exact reach."""
    import mpmath

    top = int(r)
    with mpmath.workprec(96):
        return float(mpmath.harmonic(top + 1) - 1)


def expect_phi_trunc(r) -> Fraction:
    """E of the exit time truncated at r: sum_{k=1}^{floor r} k 2^-k, exact."""
    r = Fraction(r)
    if r < 1:
        raise ValueError("r must be >= 1")
    top = r.numerator // r.denominator
    # closed form of the partial sum
    return 2 - Fraction(top + 2, 1 << top)


def phi_moments() -> tuple[Fraction, Fraction]:
    """Full-series mean and second moment of the exit time: (2, 6)."""
    return Fraction(2), Fraction(6)


def expect_vm(m: int, r) -> Fraction:
    """Exact mean of the truncated upper envelope.

    Each level j <= L contributes 2*C and the geometric tail over j > L
    another 2*C, where C = sum_i 1/(2^m-i-1) and L = floor(log2 r); the
    total collapses to 2*(L+2)*C.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    L = floor_log2(r)
    C = sum((Fraction(1, (1 << m) - i - 1) for i in range(1 << (m - 1))), Fraction(0))
    return 2 * (L + 2) * C


def expect_wm(m: int, r, shift: int = ETA_LOWER_SHIFT) -> Fraction:
    """Exact mean of the truncated lower envelope (pointwise definition).

    Levels j < L carry z_{j,i}; the tail j >= L is clamped to z_{L-1,i}
    and summed as a geometric series, with L = floor(log2 r).  The shift
    matches the default in wm_eval, so the result is the true mean of
    that observable.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    L = floor_log2(r)
    half_cells = 1 << (m - 1)
    D = sum((Fraction(1, (1 << m) - i) for i in range(half_cells)), Fraction(0))
    total = Fraction(0)
    for j in range(L):
        # sum_i z_{j,i} * 2^-(j+m)
        total += 2 * D - Fraction(j + 1, 1 << (j + 1))
    # tail: sum_{j>=L} 2^-(j+m) * sum_i z_{L-1,i} = 2D - L*2^-L
    total += 2 * D - Fraction(L, 1 << L)
    return total - shift


def chi_step(r) -> StepFunction:
    """Step-function version of the truncated digit observable.

    Value k on the cell of digit k for k <= floor(r), 0 below the last
    retained cell.  Pieces are stored half-open on the left, which agrees
    with the digit cells up to a null set and leaves every integral exact.
    """
    r = Fraction(r)
    if r < 0:
        raise ValueError("r must be >= 0")
    top = r.numerator // r.denominator
    if top == 0:
        return StepFunction.constant(0)
    bp = [Fraction(0), Fraction(1, top + 1)]
    vals = [Fraction(0)]
    for k in range(top, 0, -1):
        bp.append(Fraction(1, k))
        vals.append(Fraction(k))
    return StepFunction(bp, vals)
