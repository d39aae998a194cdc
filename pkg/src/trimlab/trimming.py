"""Trimming sequences, threshold sequences, and streaming sum ledgers.

The trimming sequence derived from a positive function psi is

    b_n = floor( (log psi(floor(log n)) - log log n) / log 2 ),

meaningful for n >= 3.  Whether psi has summable or divergent reciprocals
is user-declared metadata: it is a tail property and not checkable from
finitely many values.
"""

from __future__ import annotations

import ast
import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import mpmath

from .errors import CapacityError, ThresholdError

#: Working precision (bits) for all real-valued sequence evaluations.
REAL_PREC = 128

#: Denominator exponent for directed rounding of real thresholds: values
#: are rounded down to multiples of 2**-THRESHOLD_SCALE.
THRESHOLD_SCALE = 128


@dataclass(frozen=True)
class PsiSpec:
    """A positive function on the positive integers with declared class."""

    evaluator: Callable[[int], mpmath.mpf]
    declared_class: str  # "summable" or "divergent"
    label: str = ""

    def __post_init__(self):
        if self.declared_class not in ("summable", "divergent"):
            raise ValueError("declared_class must be 'summable' or 'divergent'")

    def __call__(self, n: int) -> mpmath.mpf:
        with mpmath.workprec(REAL_PREC):
            v = mpmath.mpf(self.evaluator(n))
        if v <= 0:
            raise ValueError(f"psi({n}) = {v} is not positive")
        return v


_ALLOWED_CALLS = ("log", "pow")


def _eval_node(node: ast.AST, n: int):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, n)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return mpmath.mpf(node.value)
    if isinstance(node, ast.Name) and node.id == "n":
        return mpmath.mpf(n)
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Mult, ast.Pow)):
        left = _eval_node(node.left, n)
        right = _eval_node(node.right, n)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Mult):
            return left * right
        return left ** right
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _ALLOWED_CALLS and not node.keywords:
        args = [_eval_node(a, n) for a in node.args]
        if node.func.id == "log":
            if len(args) != 1:
                raise ValueError("log takes one argument")
            return mpmath.log(args[0])
        if len(args) != 2:
            raise ValueError("pow takes two arguments")
        return args[0] ** args[1]
    raise ValueError(f"disallowed construct in psi expression: {ast.dump(node)}")


def psi_from_expression(expr: str, declared_class: str, label: str = "") -> PsiSpec:
    """Build a PsiSpec from a small expression grammar.

    Allowed: the variable n, numeric constants, +, *, **, and the
    functions log (natural) and pow.  Evaluation order is the parse
    order at 128-bit precision, left to right.
    """
    tree = ast.parse(expr, mode="eval")
    _eval_node(tree, 3)  # validate the grammar eagerly

    def evaluator(n: int) -> mpmath.mpf:
        with mpmath.workprec(REAL_PREC):
            return _eval_node(tree, n)

    return PsiSpec(evaluator=evaluator, declared_class=declared_class,
                   label=label or expr)


def b_of_n(n: int, psi: PsiSpec) -> int:
    """Raw trimming count; may be negative for small n."""
    if n < 3:
        raise ValueError("n must be >= 3 (log log n must be positive)")
    with mpmath.workprec(REAL_PREC):
        k = int(mpmath.floor(mpmath.log(n)))
        val = (mpmath.log(psi(k)) - mpmath.log(mpmath.log(n))) / mpmath.log(2)
        return int(mpmath.floor(val))


def b_of_n_clamped(n: int, psi: PsiSpec) -> int:
    return max(0, b_of_n(n, psi))


def omega_min(psi: PsiSpec) -> PsiSpec:
    """omega(n) = min over j in {0,1} of psi(floor(n log 2) + j)."""
    def evaluator(n: int) -> mpmath.mpf:
        with mpmath.workprec(REAL_PREC):
            base = int(mpmath.floor(n * mpmath.log(2)))
            return min(psi(base), psi(base + 1))
    return PsiSpec(evaluator=evaluator, declared_class=psi.declared_class,
                   label=f"omega_min[{psi.label}]")


def omega_max(psi: PsiSpec) -> PsiSpec:
    """omega(n) = max over j in {0,1} of psi(floor(n log 2) + j)."""
    def evaluator(n: int) -> mpmath.mpf:
        with mpmath.workprec(REAL_PREC):
            base = int(mpmath.floor(n * mpmath.log(2)))
            return max(psi(base), psi(base + 1))
    return PsiSpec(evaluator=evaluator, declared_class=psi.declared_class,
                   label=f"omega_max[{psi.label}]")


def _round_down(x: mpmath.mpf) -> Fraction:
    """Round a positive real down to a rational with denominator 2**128."""
    scaled = int(mpmath.floor(x * (mpmath.mpf(2) ** THRESHOLD_SCALE)))
    return Fraction(scaled, 1 << THRESHOLD_SCALE)


def thresholds(n: int) -> tuple[Fraction, Fraction, Fraction]:
    """(t_n, r_n, d_n) = (n (log n)^{3/4}, n log n, n log n).

    Computed at 128-bit precision and rounded down to denominator 2**128,
    so comparisons against exact integers are reproducible across
    platforms.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    with mpmath.workprec(REAL_PREC + 32):
        logn = mpmath.log(n)
        t = _round_down(n * logn ** mpmath.mpf("0.75"))
        r = _round_down(n * logn)
    return t, r, r


@dataclass
class SumLedger:
    """Streaming state for one orbit's digit sums.

    Holds the exact running total, the K largest digits seen (multiset
    semantics: values matter, not positions), and exceedance counts for
    thresholds registered before streaming begins.
    """

    capacity: int
    n: int = 0
    total: int = 0
    _top: list = field(default_factory=list)  # min-heap of the K largest
    exceed_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0")

    def register_threshold(self, c) -> None:
        if self.n > 0:
            raise ThresholdError("thresholds must be registered before streaming")
        self.exceed_counts[Fraction(c)] = 0


def ledger_push(ledger: SumLedger, a: int) -> SumLedger:
    """Push one digit; returns the (mutated) ledger for chaining."""
    if a < 1:
        raise ValueError("digit must be >= 1")
    ledger.n += 1
    ledger.total += a
    top = ledger._top
    if ledger.capacity > 0:
        if len(top) < ledger.capacity:
            heapq.heappush(top, a)
        elif a > top[0]:
            heapq.heapreplace(top, a)
    for c in ledger.exceed_counts:
        if a > c:
            ledger.exceed_counts[c] += 1
    return ledger


def trimmed_sum(ledger: SumLedger, b: int) -> int:
    """S_n minus the b largest digits (multiset semantics)."""
    if not (0 <= b <= min(ledger.n, ledger.capacity)):
        raise CapacityError(
            f"b={b} outside [0, min(n={ledger.n}, K={ledger.capacity})]")
    if b == 0:
        return ledger.total
    largest = heapq.nlargest(b, ledger._top)
    return ledger.total - sum(largest)


def max_digit(ledger: SumLedger) -> int:
    """Largest digit seen so far (capacity must be >= 1)."""
    if ledger.capacity < 1 or not ledger._top:
        raise CapacityError("no top tracking available")
    return max(ledger._top)


def truncated_sum(digits, r) -> int:
    """T_n^r: per-term truncation at level r."""
    return sum(a if a <= r else 0 for a in digits)


def count_exceed(ledger: SumLedger, c) -> int:
    """Exact count of pushed digits strictly greater than c."""
    key = Fraction(c)
    if key not in ledger.exceed_counts:
        raise ThresholdError(f"threshold {c} was not registered")
    return ledger.exceed_counts[key]
