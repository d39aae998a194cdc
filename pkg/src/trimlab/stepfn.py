"""Piecewise-constant functions on [0,1) with exact rational arithmetic.

StepFunction is the workhorse value type for all measure, integral,
variation, and operator computations.  Instances are canonical (sorted
breakpoints, adjacent equal values merged) so equality is structural and
exact regression tests can compare whole functions.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .errors import PieceCapError

#: Default cap on piece counts in operator pipelines.
DEFAULT_PIECE_CAP = 1 << 22

_ZERO = Fraction(0)
_ONE = Fraction(1)


class StepFunction:
    """A function constant on [x_{i-1}, x_i) with rational breakpoints.

    breakpoints: 0 = x_0 < x_1 < ... < x_N = 1
    values:      c_1 ... c_N, the value on [x_{i-1}, x_i)
    """

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints: Sequence[Fraction], values: Sequence[Fraction]):
        bp = [Fraction(b) for b in breakpoints]
        vals = [Fraction(v) for v in values]
        if len(bp) != len(vals) + 1:
            raise ValueError("need exactly one more breakpoint than values")
        if bp[0] != 0 or bp[-1] != 1:
            raise ValueError("domain must be exactly [0,1)")
        if any(bp[i] >= bp[i + 1] for i in range(len(bp) - 1)):
            raise ValueError("breakpoints must be strictly increasing")
        # canonical form: merge adjacent pieces with equal values
        mbp = [bp[0]]
        mvals: list[Fraction] = []
        for i, v in enumerate(vals):
            if mvals and mvals[-1] == v:
                mbp[-1] = bp[i + 1]
            else:
                mvals.append(v)
                mbp.append(bp[i + 1])
        object.__setattr__(self, "breakpoints", tuple(mbp))
        object.__setattr__(self, "values", tuple(mvals))

    def __setattr__(self, name, value):
        raise AttributeError("StepFunction is immutable")

    @property
    def pieces(self) -> int:
        return len(self.values)

    def __call__(self, x) -> Fraction:
        x = Fraction(x)
        if not (0 <= x < 1):
            raise ValueError("argument outside [0,1)")
        bp = self.breakpoints
        lo, hi = 0, len(self.values) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if bp[mid] <= x:
                lo = mid
            else:
                hi = mid - 1
        return self.values[lo]

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepFunction):
            return NotImplemented
        return self.breakpoints == other.breakpoints and self.values == other.values

    def __hash__(self):
        return hash((self.breakpoints, self.values))

    def __repr__(self):
        return f"StepFunction({self.pieces} pieces)"

    @staticmethod
    def constant(c) -> "StepFunction":
        return StepFunction([_ZERO, _ONE], [Fraction(c)])

    @staticmethod
    def indicator(a, b) -> "StepFunction":
        """Indicator of [a, b) with 0 <= a < b <= 1."""
        a, b = Fraction(a), Fraction(b)
        if not (0 <= a < b <= 1):
            raise ValueError("need 0 <= a < b <= 1")
        bp = [_ZERO]
        vals = []
        if a > 0:
            bp.append(a)
            vals.append(_ZERO)
        bp.append(b)
        vals.append(_ONE)
        if b < 1:
            bp.append(_ONE)
            vals.append(_ZERO)
        return StepFunction(bp, vals)

    @staticmethod
    def from_intervals(intervals: Iterable[tuple[Fraction, Fraction]]) -> "StepFunction":
        """Indicator of a disjoint union of half-open intervals."""
        ivs = sorted((Fraction(a), Fraction(b)) for a, b in intervals)
        bp = [_ZERO]
        vals: list[Fraction] = []
        for a, b in ivs:
            if a < bp[-1]:
                raise ValueError("intervals must be disjoint and sorted")
            if a > bp[-1]:
                bp.append(a)
                vals.append(_ZERO)
            bp.append(b)
            vals.append(_ONE)
        if bp[-1] < 1:
            bp.append(_ONE)
            vals.append(_ZERO)
        if not vals:
            return StepFunction.constant(0)
        return StepFunction(bp, vals)


def sf_integral(zeta: StepFunction) -> Fraction:
    """Lebesgue integral over [0,1), exact."""
    bp, vals = zeta.breakpoints, zeta.values
    return sum((vals[i] * (bp[i + 1] - bp[i]) for i in range(len(vals))), _ZERO)


def sf_variation(zeta: StepFunction) -> Fraction:
    """Total variation on [0,1): sum of interior jump magnitudes.

    No jump is counted at 0 or 1; the domain is the half-open interval.
    """
    vals = zeta.values
    return sum((abs(vals[i + 1] - vals[i]) for i in range(len(vals) - 1)), _ZERO)


def sf_sup_norm(zeta: StepFunction) -> Fraction:
    return max(abs(v) for v in zeta.values)


def sf_l1_norm(zeta: StepFunction) -> Fraction:
    bp, vals = zeta.breakpoints, zeta.values
    return sum((abs(vals[i]) * (bp[i + 1] - bp[i]) for i in range(len(vals))), _ZERO)


def sf_bv_norm(zeta: StepFunction) -> Fraction:
    return sf_variation(zeta) + sf_sup_norm(zeta)


def _zip_pieces(z1: StepFunction, z2: StepFunction, op: Callable) -> StepFunction:
    bp = sorted(set(z1.breakpoints) | set(z2.breakpoints))
    vals = [op(z1(bp[i]), z2(bp[i])) for i in range(len(bp) - 1)]
    return StepFunction(bp, vals)


def sf_add(z1: StepFunction, z2: StepFunction) -> StepFunction:
    return _zip_pieces(z1, z2, lambda a, b: a + b)


def sf_sub(z1: StepFunction, z2: StepFunction) -> StepFunction:
    return _zip_pieces(z1, z2, lambda a, b: a - b)


def sf_product(z1: StepFunction, z2: StepFunction) -> StepFunction:
    return _zip_pieces(z1, z2, lambda a, b: a * b)


def sf_scale(zeta: StepFunction, c) -> StepFunction:
    c = Fraction(c)
    return StepFunction(zeta.breakpoints, [c * v for v in zeta.values])


def sf_center(zeta: StepFunction) -> StepFunction:
    """zeta minus its mean; the centered part has integral 0."""
    return sf_add(zeta, StepFunction.constant(-sf_integral(zeta)))


def sf_pullback_tau(zeta: StepFunction, n: int,
                    piece_cap: int = DEFAULT_PIECE_CAP) -> StepFunction:
    """The step function x -> zeta(2^n x mod 1).

    Piece count multiplies by 2 per doubling, so the cap guards against
    runaway exact computations.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    f = zeta
    for _ in range(n):
        if 2 * f.pieces > piece_cap:
            raise PieceCapError(
                f"pullback would exceed piece cap {piece_cap}")
        half = Fraction(1, 2)
        bp = [b / 2 for b in f.breakpoints]
        bp.extend(half + b / 2 for b in f.breakpoints[1:])
        vals = list(f.values) + list(f.values)
        f = StepFunction(bp, vals)
    return f
