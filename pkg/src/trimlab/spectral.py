"""Transfer operators, cylinder events, mixing coefficients, moment bounds.

Everything here is exact rational arithmetic on step functions.  The
transfer operator of the doubling map averages the two branch preimages
and halves variation; its adjoint identity lets joint measures over long
lags be computed without the exponential piece growth of pullbacks (the
pullback route is validated separately by duality_check).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath

from .errors import CombinatorialCapError, PieceCapError, StrideError
from .observables import CellIndex, chi_step, expect_chi_trunc
from .stepfn import (DEFAULT_PIECE_CAP, StepFunction, sf_center, sf_integral,
                     sf_l1_norm, sf_product, sf_pullback_tau, sf_sup_norm,
                     sf_variation)

#: Largest digit value accepted when building digit events.
DEFAULT_DIGIT_CAP = 1 << 20

#: Largest future-algebra atom count the mixing enumerator will scan.
DEFAULT_ATOM_CAP = 20

_HALF = Fraction(1, 2)


@dataclass(frozen=True)
class CylinderEvent:
    """A finite union of disjoint half-open rational intervals in [0,1).

    Events generated by digit or cell constraints are stored half-open on
    the left; this agrees with the generating conditions up to a null set
    and keeps every measure exact.
    """

    intervals: tuple
    description: str = ""

    def __post_init__(self):
        ivs = tuple((Fraction(a), Fraction(b)) for a, b in self.intervals)
        prev = Fraction(-1)
        for a, b in ivs:
            if not (0 <= a < b <= 1):
                raise ValueError(f"bad interval [{a}, {b})")
            if a < prev:
                raise ValueError("intervals must be sorted and disjoint")
            prev = b
        object.__setattr__(self, "intervals", ivs)

    @property
    def measure(self) -> Fraction:
        return sum((b - a for a, b in self.intervals), Fraction(0))

    def indicator(self) -> StepFunction:
        return StepFunction.from_intervals(self.intervals)


def digit_eq(i: int, digit_cap: int = DEFAULT_DIGIT_CAP) -> CylinderEvent:
    """{a_1 = i}: the constancy cell of digit i."""
    if not (1 <= i <= digit_cap):
        raise ValueError(f"digit {i} outside [1, {digit_cap}]")
    return CylinderEvent(((Fraction(1, i + 1), Fraction(1, i)),),
                         description=f"a=eq{i}")


def digit_ge(c: int, digit_cap: int = DEFAULT_DIGIT_CAP) -> CylinderEvent:
    """{a_1 >= c}: all cells from digit c down to 0+."""
    if not (1 <= c <= digit_cap):
        raise ValueError(f"digit {c} outside [1, {digit_cap}]")
    return CylinderEvent(((Fraction(0), Fraction(1, c)),),
                         description=f"a=ge{c}")


def digit_in(values: Iterable[int], digit_cap: int = DEFAULT_DIGIT_CAP) -> CylinderEvent:
    """{a_1 in A} for a finite digit set A."""
    vals = sorted(set(values), reverse=True)
    if not vals:
        raise ValueError("empty digit set")
    ivs = []
    for i in vals:
        if not (1 <= i <= digit_cap):
            raise ValueError(f"digit {i} outside [1, {digit_cap}]")
        lo, hi = Fraction(1, i + 1), Fraction(1, i)
        if ivs and ivs[-1][1] == lo:
            ivs[-1] = (ivs[-1][0], hi)
        else:
            ivs.append((lo, hi))
    return CylinderEvent(tuple(ivs), description=f"a=in{sorted(vals)}")


def exit_time_event(n: int) -> CylinderEvent:
    """{phi = n}: the dyadic level J_{n-1} = [2^-n, 2^{1-n})."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return CylinderEvent(((Fraction(1, 1 << n), Fraction(1, 1 << (n - 1))),),
                         description=f"phi={n}")


def induced_cell_event(c: CellIndex) -> CylinderEvent:
    """The cell J_{j,i}^m as an event."""
    return CylinderEvent(((c.lower, c.upper),),
                         description=f"cell(j={c.j},i={c.i},m={c.m})")


def transfer_apply(zeta: StepFunction,
                   piece_cap: int = DEFAULT_PIECE_CAP) -> StepFunction:
    """One application of the doubling-map transfer operator.

    (Lζ)(x) = (ζ(x/2) + ζ((x+1)/2)) / 2.  Breakpoints of the image come
    from stretching each half of ζ's grid; piece count never grows.
    """
    if zeta.pieces > piece_cap:
        raise PieceCapError("input exceeds piece cap")
    bps = set()
    for b in zeta.breakpoints[1:-1]:
        if b < _HALF:
            bps.add(2 * b)
        elif b > _HALF:
            bps.add(2 * b - 1)
        # b == 1/2 maps to the domain endpoints; no interior breakpoint
    bp = [Fraction(0)] + sorted(bps) + [Fraction(1)]
    vals = [(zeta(bp[i] / 2) + zeta((bp[i] + 1) / 2)) / 2
            for i in range(len(bp) - 1)]
    return StepFunction(bp, vals)


def transfer_power(zeta: StepFunction, n: int,
                   piece_cap: int = DEFAULT_PIECE_CAP) -> StepFunction:
    if n < 0:
        raise ValueError("n must be >= 0")
    f = zeta
    for _ in range(n):
        f = transfer_apply(f, piece_cap)
    return f


def transfer_apply_induced(zeta: StepFunction,
                           piece_cap: int = DEFAULT_PIECE_CAP) -> StepFunction:
    """Transfer operator of the jump map.

    (L_B ζ)(x) = sum_{n>=0} 2^-(n+1) ζ((x+1)/2^{n+1}); branch n lands in
    the dyadic level J_n, so only levels down to ζ's smallest positive
    breakpoint contribute non-constant terms and the remaining geometric
    tail is summed in closed form.
    """
    if zeta.pieces > piece_cap:
        raise PieceCapError("input exceeds piece cap")
    interior = zeta.breakpoints[1:-1]
    bps = set()
    for b in interior:
        # b lies in exactly one level J_n = [2^-n-1, 2^-n)
        n = 0
        while b < Fraction(1, 1 << (n + 1)):
            n += 1
        x = (1 << (n + 1)) * b - 1
        if 0 < x < 1:
            bps.add(x)
    # depth below which zeta is constant
    smallest = min(interior) if interior else Fraction(1)
    depth = 0
    while Fraction(1, 1 << (depth + 1)) >= smallest:
        depth += 1
    tail_value = zeta.values[0]  # value on the first piece near 0
    bp = [Fraction(0)] + sorted(bps) + [Fraction(1)]
    vals = []
    for i in range(len(bp) - 1):
        x = bp[i]
        total = Fraction(0)
        for n in range(depth + 1):
            total += Fraction(1, 1 << (n + 1)) * zeta((x + 1) / (1 << (n + 1)))
        total += Fraction(1, 1 << (depth + 1)) * tail_value
        vals.append(total)
    return StepFunction(bp, vals)


def duality_check(phi: StepFunction, zeta: StepFunction,
                  piece_cap: int = DEFAULT_PIECE_CAP) -> Fraction:
    """|integral (phi.tau) zeta - integral phi (L zeta)|; contract: 0."""
    lhs = sf_integral(sf_product(sf_pullback_tau(phi, 1, piece_cap), zeta))
    rhs = sf_integral(sf_product(phi, transfer_apply(zeta, piece_cap)))
    return abs(lhs - rhs)


def variation_decay_check(zeta: StepFunction, n: int,
                          piece_cap: int = DEFAULT_PIECE_CAP) -> tuple[Fraction, Fraction]:
    """(V of the n-fold transfer image of the centered part, bound 2^-n V(zeta))."""
    centered = sf_center(zeta)
    img = transfer_power(centered, n, piece_cap)
    return sf_variation(img), Fraction(sf_variation(zeta), 1 << n)


def correlation(phi: StepFunction, zeta: StepFunction, n: int,
                piece_cap: int = DEFAULT_PIECE_CAP) -> Fraction:
    """|integral (phi.tau^n) zeta - integral phi * integral zeta|, exact.

    Computed through the adjoint (transfer) route, which is piece-stable;
    duality_check certifies that route against the literal pullback.
    """
    joint = sf_integral(sf_product(phi, transfer_power(zeta, n, piece_cap)))
    return abs(joint - sf_integral(phi) * sf_integral(zeta))


def correlation_bound(phi: StepFunction, zeta: StepFunction, n: int) -> Fraction:
    """The decay-of-correlations bound 2^-n |phi|_1 V(zeta)."""
    return Fraction(1, 1 << n) * sf_l1_norm(phi) * sf_variation(zeta)


def joint_measure_tau(events: Sequence[tuple[int, CylinderEvent]],
                      piece_cap: int = DEFAULT_PIECE_CAP) -> Fraction:
    """Exact Lebesgue measure of the intersection of lagged events.

    events: (lag, event) pairs, the event observed after lag applications
    of the doubling map.  Uses the ascending-lag adjoint recursion
    acc -> 1_E * L^gap(acc), which keeps piece counts bounded.
    """
    if not events:
        raise ValueError("need at least one event")
    evs = sorted(events, key=lambda le: le[0])
    if evs[0][0] < 0:
        raise ValueError("lags must be >= 0")
    acc = evs[0][1].indicator()
    prev_lag = evs[0][0]
    for lag, ev in evs[1:]:
        acc = transfer_power(acc, lag - prev_lag, piece_cap)
        acc = sf_product(ev.indicator(), acc)
        prev_lag = lag
    return sf_integral(acc)


def _is_level_partition_aligned(ev: CylinderEvent, m: int) -> bool:
    """True when the event is a union of cells of the resolution-m partition.

    An endpoint is a cell boundary iff it is 0 or has the form
    (2^m - i)/2^{j+m} for its dyadic level j, i.e. scaling by 2^{j+m}
    gives an integer.
    """
    for a, b in ev.intervals:
        for x in (a, b):
            if x == 0 or x == 1:
                continue
            j = 0
            while x < Fraction(1, 1 << (j + 1)):
                j += 1
            scaled = x * (1 << (j + m))
            if scaled.denominator != 1:
                return False
    return True


def joint_measure_induced(events: Sequence[tuple[int, CylinderEvent]], stride: int,
                          piece_cap: int = DEFAULT_PIECE_CAP) -> Fraction:
    """Exact measure of an intersection of events lagged along the jump map.

    events: (induced-lag, event) pairs.  Lags must agree modulo the
    stride (offset by the smallest lag) and events must be measurable
    with respect to the resolution-`stride` cell partition; these are the
    hypotheses under which the joint measure factorizes, and violating
    them is an error rather than a silent wrong answer.
    """
    if not events:
        raise ValueError("need at least one event")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    evs = sorted(events, key=lambda le: le[0])
    base = evs[0][0]
    for lag, ev in evs:
        if (lag - base) % stride != 0:
            raise StrideError(
                f"lag {lag} is not at stride {stride} from base lag {base}")
        if not _is_level_partition_aligned(ev, stride):
            raise StrideError(
                f"event {ev.description!r} is not measurable at resolution {stride}")
    acc = evs[0][1].indicator()
    prev_lag = base
    for lag, ev in evs[1:]:
        for _ in range(lag - prev_lag):
            acc = transfer_apply_induced(acc, piece_cap)
        acc = sf_product(ev.indicator(), acc)
        prev_lag = lag
    return sf_integral(acc)


def _positive_measure_tuples(length: int, cap: int) -> list[tuple]:
    """Digit tuples (with None as the tail atom a > cap) of positive measure.

    Consecutive digits obey the halving chain: after a digit value v >= 2
    the next digit is v // 2 with probability one, so any tuple breaking
    that rule is a null atom and is dropped.  After the tail atom the next
    digit lies in (cap // 2, cap] or the tail.
    """
    tuples: list[tuple] = [()]
    for _ in range(length):
        nxt = []
        for t in tuples:
            if not t:
                nxt.extend((v,) for v in range(1, cap + 1))
                nxt.append((None,))
                continue
            last = t[-1]
            if last is None:
                # a > cap halves into ((cap+1)//2 .. cap) or stays above cap
                for v in range((cap + 1) // 2, cap + 1):
                    nxt.append(t + (v,))
                nxt.append(t + (None,))
            elif last == 1:
                nxt.extend(t + (v,) for v in range(1, cap + 1))
                nxt.append(t + (None,))
            else:
                nxt.append(t + (last // 2,))
        tuples = nxt
    return tuples


def _atom_event(value, cap: int) -> CylinderEvent:
    return digit_ge(cap + 1) if value is None else digit_eq(value)


def alpha_coefficient(k_len: int, n: int, future_len: int, digit_cap: int,
                      atom_cap: int = DEFAULT_ATOM_CAP,
                      piece_cap: int = DEFAULT_PIECE_CAP) -> Fraction:
    """Exact mixing coefficient between capped past and future digit algebras.

    Past algebra: digits a_1..a_{k_len} capped at digit_cap with a tail
    atom; future algebra: a_{k_len+n}..a_{k_len+n+future_len-1} likewise.
    The sup of |P(B&C) - P(B)P(C)| over unions of atoms is found by exact
    enumeration of future-atom subsets with the optimal past set chosen
    per subset (atoms with positive signed mass).  Null atoms forced by
    the digit-halving chain are skipped up front.
    """
    if k_len < 1 or future_len < 1 or n < 1 or digit_cap < 1:
        raise ValueError("all parameters must be >= 1")
    past_atoms = _positive_measure_tuples(k_len, digit_cap)
    future_atoms = _positive_measure_tuples(future_len, digit_cap)
    if min(len(future_atoms), len(past_atoms)) > atom_cap:
        raise CombinatorialCapError(
            f"{len(past_atoms)} past x {len(future_atoms)} future atoms "
            f"exceed the enumeration cap {atom_cap}")

    def atom_acc(t: tuple) -> StepFunction:
        acc = _atom_event(t[0], digit_cap).indicator()
        for v in t[1:]:
            acc = transfer_apply(acc, piece_cap)
            acc = sf_product(_atom_event(v, digit_cap).indicator(), acc)
        return acc

    # pair measures via one adjoint pass per past atom
    past_acc = [atom_acc(t) for t in past_atoms]
    fut_acc = [atom_acc(t) for t in future_atoms]
    p_meas = [sf_integral(f) for f in past_acc]
    f_meas = [sf_integral(f) for f in fut_acc]
    matrix = []
    for pi, pa in enumerate(past_acc):
        pushed = transfer_power(pa, n, piece_cap)
        row = []
        for fi, ft in enumerate(future_atoms):
            acc = sf_product(_atom_event(ft[0], digit_cap).indicator(), pushed)
            for v in ft[1:]:
                acc = transfer_apply(acc, piece_cap)
                acc = sf_product(_atom_event(v, digit_cap).indicator(), acc)
            row.append(sf_integral(acc) - p_meas[pi] * f_meas[fi])
        matrix.append(row)

    # scale to integers for the subset scan
    denom = 1
    for row in matrix:
        for x in row:
            denom = denom * x.denominator // math.gcd(denom, x.denominator)
    scaled = [[int(x * denom) for x in row] for row in matrix]

    # enumerate subsets on the smaller side; |P(B&C)-P(B)P(C)| is
    # symmetric in the two unions, so transposing the matrix is sound
    if len(future_atoms) > len(past_atoms):
        scaled = [list(col) for col in zip(*scaled)]
    n_p, n_f = len(scaled), len(scaled[0])
    signed = [0] * n_p
    best = 0
    prev_code = 0
    for idx in range(1, 1 << n_f):
        code = idx ^ (idx >> 1)  # Gray code: one future atom toggles
        bit = (code ^ prev_code).bit_length() - 1
        sign = 1 if code & (1 << bit) else -1
        for p in range(n_p):
            signed[p] += sign * scaled[p][bit]
        prev_code = code
        value = sum(s for s in signed if s > 0)
        if value > best:
            best = value
    return Fraction(best, denom)


def alpha_bound_holds(value: Fraction, n: int) -> bool:
    """Exact check value <= 2^{-n/2+2} without leaving rational arithmetic.

    value <= 4 * 2^{-n/2}  iff  value^2 * 2^n <= 16 (both sides positive).
    """
    return value >= 0 and value * value * (1 << n) <= 16


def second_moment_truncated(n: int, r, exact_lag: int = 12,
                            piece_cap: int = DEFAULT_PIECE_CAP) -> tuple[Fraction, Fraction]:
    """Certified enclosure of E((T_n^r)^2) for the stationary digit sum.

    Diagonal terms use the closed form sum i/(i+1).  Cross terms at lag
    d <= exact_lag are exact adjoint-route integrals; beyond that each
    term is bracketed by (E chi^r)^2 +/- 2^-d |chi^r|_1 V(chi^r).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if exact_lag > 20:
        raise ValueError("exact_lag capped at 20")
    r = Fraction(r)
    top = r.numerator // r.denominator
    diag = n * sum((Fraction(i, i + 1) for i in range(1, top + 1)), Fraction(0))
    if n == 1 or top == 0:
        return diag, diag
    f = chi_step(r)
    mean = expect_chi_trunc(r)
    l1 = sf_l1_norm(f)
    var = sf_variation(f)
    lower = diag
    upper = diag
    pushed = f
    for d in range(1, n):
        weight = 2 * (n - d)
        if d <= exact_lag:
            pushed = transfer_apply(pushed, piece_cap)
            exact = sf_integral(sf_product(f, pushed))
            lower += weight * exact
            upper += weight * exact
        else:
            slack = Fraction(1, 1 << d) * l1 * var
            center = mean * mean
            lower += weight * max(Fraction(0), center - slack)
            upper += weight * (center + slack)
    return lower, upper


def bernstein_bound(t, var_z, m) -> mpmath.mpf:
    """2 exp(-t^2 / (2 V + (2/3) M t)) at 128-bit precision."""
    with mpmath.workprec(128):
        t, var_z, m = mpmath.mpf(t), mpmath.mpf(var_z), mpmath.mpf(m)
        if t < 0 or var_z <= 0 or m <= 0:
            raise ValueError("arguments must be positive (t >= 0)")
        return 2 * mpmath.exp(-t * t / (2 * var_z + mpmath.mpf(2) / 3 * m * t))


def bernstein_simple(kappa, ez, k) -> mpmath.mpf:
    """2 exp(-3 kappa^2/(6 + 2 kappa) * E/K) at 128-bit precision."""
    with mpmath.workprec(128):
        kappa, ez, k = mpmath.mpf(kappa), mpmath.mpf(ez), mpmath.mpf(k)
        if kappa <= 0 or ez <= 0 or k <= 0:
            raise ValueError("arguments must be positive")
        return 2 * mpmath.exp(-3 * kappa ** 2 / (6 + 2 * kappa) * ez / k)
