"""Vectorized orbit statistics over the raw bit stream.

The slow exact lane (bitstream/dynamics) defines the semantics; this
module reproduces the same quantities with numpy at Monte Carlo scale.
The key identity is the excursion decomposition: between consecutive
1-bits the digits form the halving chain of the excursion head, so

    sum of digits over a full excursion = 2*head - popcount(head),

and truncation, exceedance counts, and top-k extraction all reduce to
closed forms in the head value.  Heads are computed by one integer
division per excursion on a 32-bit window after the leading 1-bit; the
division is certified (independent of unseen bits) or the excursion
falls back to the exact bit-stream lane.  Vector-lane heads always carry
at most 31 bits, so every numpy accumulation stays far from int64
overflow; anything larger is routed through exact Python integers.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .bitstream import BitPoint, bit_block
from .dynamics import chi_of_point

_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_IID_SALT = 0x632BE59BD9B4E019

_U = np.uint64


def _mix_u64(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64)
    z ^= z >> _U(30)
    z *= _U(0xBF58476D1CE4E5B9)
    z ^= z >> _U(27)
    z *= _U(0x94D049BB133111EB)
    z ^= z >> _U(31)
    return z


def splitmix_blocks(seed: int, start: int, count: int) -> np.ndarray:
    """Blocks start..start+count-1 of the seeded stream (matches bit_block)."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return _mix_u64(_U(seed & _MASK64) + idx * _U(_GAMMA))


def blocks_to_bits(blocks: np.ndarray) -> np.ndarray:
    """MSB-first bit unpacking, matching the scalar bit order."""
    return np.unpackbits(blocks.astype(">u8").view(np.uint8))


def _bit_length_u64(v: np.ndarray) -> np.ndarray:
    """Exact bit lengths of uint64 values.

    Each 32-bit half converts to float64 exactly, so frexp exponents are
    exact; full-width conversion would round near the top of the range.
    """
    v = v.astype(np.uint64)
    hi = v >> _U(32)
    bl_hi = np.frexp(hi.astype(np.float64))[1].astype(np.int64)
    bl_lo = np.frexp((v & _U(0xFFFFFFFF)).astype(np.float64))[1].astype(np.int64)
    return np.where(hi > 0, 32 + bl_hi, bl_lo)


def _window_u64(blocks: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """The 64 bits starting at bit index pos, one uint64 per entry.

    Callers must guarantee pos // 64 + 1 is a valid block index.
    """
    k = pos >> 6
    s = (pos & 63).astype(np.uint64)
    w1 = blocks[k]
    w2 = blocks[k + 1]
    rest = w2 >> (_U(64) - np.maximum(s, _U(1)))
    return (w1 << s) | np.where(s == 0, _U(0), rest)


def _chain_full(beta: int) -> int:
    """Sum of the halving chain of beta down to 1."""
    return 2 * beta - beta.bit_count()


def _chain_partial(beta: int, c: int) -> int:
    """Sum of the first c+1 chain terms beta, beta>>1, ..., beta>>c."""
    if c < 0:
        return 0
    tail = beta >> (c + 1)
    return _chain_full(beta) - (2 * tail - tail.bit_count()) if tail else _chain_full(beta)


def _chain_exceed(beta: int, rint: int) -> int:
    """How many chain terms are > rint."""
    return (beta // (rint + 1)).bit_length()


class OrbitStats:
    """Excursion-level statistics of one seeded orbit up to n_max digits.

    All reported sums are exact integers: the vector lane only ever holds
    head values below 2^31 (larger heads go through the exact fallback
    and are tracked per index in `special`).
    """

    def __init__(self, seed: int, n_max: int, induced_min: int = 0):
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        self.seed = seed & _MASK64
        self.n_max = n_max
        target_bits = n_max + max(2 * induced_min - n_max, 0) + 512
        while True:
            n_words = target_bits // 64 + 2
            blocks = splitmix_blocks(self.seed, 0, n_words)
            bits = blocks_to_bits(blocks)
            ones = np.flatnonzero(bits).astype(np.int64)
            # keep excursions through the first 1-bit at/after n_max-1 and
            # at least induced_min of them
            pos_idx = int(np.searchsorted(ones, n_max - 1, side="left")) if ones.size else 0
            keep = max(pos_idx + 1, induced_min)
            # +98 keeps the window's second block index in range
            if ones.size >= keep and ones.size > pos_idx \
                    and int(ones[keep - 1]) + 98 <= bits.size:
                ones = ones[:keep]
                break
            target_bits = target_bits * 2 + 1024
        self._blocks = blocks
        self.ones = ones
        starts = np.empty_like(ones)
        starts[0] = 0
        starts[1:] = ones[:-1] + 1
        self.starts = starts
        j = ones - starts
        dw = _window_u64(blocks, ones)
        u = ((dw << _U(1)) >> _U(32)) + _U(1 << 32)
        jc = np.where(j <= 30, j, 0).astype(np.uint64)
        a_num = _U(1) << (jc + _U(33))
        beta = a_num // u
        certified = (j <= 30) & (beta == a_num // (u + _U(1)))
        self.beta = np.where(certified, beta, _U(0)).astype(np.int64)
        self.special: dict[int, int] = {}
        for idx in np.flatnonzero(~certified):
            self.special[int(idx)] = self._exact_head(int(starts[idx]))
        eta = 2 * self.beta - np.bitwise_count(self.beta.astype(np.uint64)).astype(np.int64)
        eta[self.beta == 0] = 0
        self.cum_eta = np.concatenate(([0], np.cumsum(eta)))

    def _exact_head(self, pos: int) -> int:
        """Exact digit at bit position pos via the scalar lane."""
        return chi_of_point(BitPoint(self.seed, pos))

    def _head(self, idx: int) -> int:
        b = int(self.beta[idx])
        return b if b else self.special[idx]

    def _split(self, n: int) -> tuple[int, int, int]:
        """(complete excursions, partial start, partial length) at digit count n."""
        if not (1 <= n <= self.n_max):
            raise ValueError(f"n={n} outside [1, {self.n_max}]")
        count = int(np.searchsorted(self.ones, n - 1, side="right"))
        start_p = int(self.ones[count - 1]) + 1 if count > 0 else 0
        plen = n - start_p  # digits in the open excursion, possibly 0
        return count, start_p, plen

    def _specials_below(self, count: int):
        return [(i, b) for i, b in self.special.items() if i < count]

    def total_sum(self, n: int) -> int:
        count, _, plen = self._split(n)
        total = int(self.cum_eta[count])
        for _, b in self._specials_below(count):
            total += _chain_full(b)
        if plen > 0:
            total += _chain_partial(self._head(count), plen - 1)
        return total

    def truncated_sum(self, n: int, r) -> tuple[int, int]:
        """(T_n^r, count of digits > r) with per-term truncation at r."""
        rint = int(Fraction(r))  # digits > r iff digit > floor(r)
        if rint < 0:
            raise ValueError("r must be >= 0")
        count, _, plen = self._split(n)
        total = int(self.cum_eta[count])
        exceed = 0
        if rint < (1 << 31) and count > 0:
            b = self.beta[:count]
            q = b // (rint + 1)
            bl = _bit_length_u64(q.astype(np.uint64)).astype(np.int64)
            bc = b >> bl
            excess = (2 * b - np.bitwise_count(b.astype(np.uint64)).astype(np.int64)) \
                - (2 * bc - np.bitwise_count(bc.astype(np.uint64)).astype(np.int64))
            excess[b == 0] = 0
            bl[b == 0] = 0
            total -= int(excess.sum())
            exceed += int(bl.sum())
        for _, bv in self._specials_below(count):
            c = _chain_exceed(bv, rint)
            total += _chain_full(bv) - _chain_partial(bv, c - 1)
            exceed += c
        if plen > 0:
            bp = self._head(count)
            c = min(_chain_exceed(bp, rint), plen)
            total += _chain_partial(bp, plen - 1) - _chain_partial(bp, c - 1)
            exceed += c
        return total, exceed

    def max_digit(self, n: int) -> int:
        count, _, plen = self._split(n)
        best = 0
        if count > 0:
            best = int(self.beta[:count].max())
        for _, b in self._specials_below(count):
            best = max(best, b)
        if plen > 0:
            best = max(best, self._head(count))
        return best

    def trimmed_sum(self, n: int, b: int) -> int:
        """S_n minus its b largest digits (multiset semantics).

        The b largest digits live in the halving chains of the b largest
        heads, since every chain element is bounded by its head.
        """
        if b < 0:
            raise ValueError("b must be >= 0")
        total = self.total_sum(n)
        if b == 0:
            return total
        if b > n:
            raise ValueError("cannot trim more digits than exist")
        count, _, plen = self._split(n)
        no_cap = 1 << 62
        heads: list[tuple[int, int]] = []  # (head value, chain length cap)
        if count > 0:
            arr = self.beta[:count]
            k = min(b, count)
            top = np.partition(arr, count - k)[count - k:]
            heads.extend((int(v), no_cap) for v in top if v > 0)
        heads.extend((bv, no_cap) for _, bv in self._specials_below(count))
        if plen > 0:
            heads.append((self._head(count), plen))
        heads.sort(reverse=True)
        digits: list[int] = []
        for hv, cap in heads[:b]:
            digits.extend(hv >> i for i in range(min(hv.bit_length(), cap)))
        digits.sort(reverse=True)
        return total - sum(digits[:b])

    def phi_induced(self, m: int) -> int:
        """Total map steps consumed by the first m induced steps."""
        if not (1 <= m <= self.ones.size):
            raise ValueError(f"m={m} outside [1, {self.ones.size}]")
        return int(self.ones[m - 1]) + 1

    def phi_steps(self, m: int) -> np.ndarray:
        """The first m individual return times."""
        if not (1 <= m <= self.ones.size):
            raise ValueError(f"m={m} outside [1, {self.ones.size}]")
        o = self.ones[:m]
        out = np.empty(m, dtype=np.int64)
        out[0] = o[0] + 1
        out[1:] = np.diff(o)
        return out


def digit_matrix(seeds, n: int, margin: int = 256) -> np.ndarray:
    """Digits a_1..a_n for each seed, each computed independently per position.

    Every position gets its own certified window division (no chain
    shortcuts), so structural digit identities checked on this output are
    genuine cross-validations.  Rare uncertified entries fall back to the
    exact scalar lane.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    n_words = (n + margin + 63) // 64 + 1
    idx = np.arange(1, n_words + 1, dtype=np.uint64)
    blocks = _mix_u64(seeds[:, None] + idx[None, :] * _U(_GAMMA))
    nbits = n_words * 64
    bits = np.unpackbits(blocks.astype(">u8").view(np.uint8), axis=1)
    col = np.arange(nbits, dtype=np.int64)
    pos1 = np.where(bits == 1, col[None, :], nbits)
    nxt = np.minimum.accumulate(pos1[:, ::-1], axis=1)[:, ::-1][:, :n]
    j = nxt - col[None, :n]
    safe = nxt <= nbits - 98  # window's second block must stay in range
    q = np.where(safe, nxt, 0)
    rows = np.arange(seeds.size, dtype=np.int64)[:, None]
    k = q >> 6
    s = (q & 63).astype(np.uint64)
    w1 = blocks[rows, k]
    w2 = blocks[rows, k + 1]
    rest = w2 >> (_U(64) - np.maximum(s, _U(1)))
    dw = (w1 << s) | np.where(s == 0, _U(0), rest)
    u = ((dw << _U(1)) >> _U(32)) + _U(1 << 32)
    jc = np.where((j >= 0) & (j <= 30), j, 0).astype(np.uint64)
    a_num = _U(1) << (jc + _U(33))
    beta = a_num // u
    certified = safe & (j <= 30) & (beta == a_num // (u + _U(1)))
    out = np.where(certified, beta, _U(0)).astype(np.int64)
    for r, c in zip(*np.nonzero(~certified)):
        out[r, c] = chi_of_point(BitPoint(int(seeds[r]), int(c)))
    return out


def halving_defects(digits: np.ndarray) -> int:
    """Count violations of a_{i+d} = a_i >> d for d up to floor(log2 a_i)."""
    n = digits.shape[-1]
    d2 = digits.reshape(-1, n)
    defects = 0
    max_bits = int(_bit_length_u64(d2.max(initial=1).astype(np.uint64)[None])[0])
    for d in range(1, max_bits):
        if d >= n:
            break
        shifted = d2[:, : n - d] >> d
        active = shifted >= 1
        defects += int(np.count_nonzero(active & (d2[:, d:] != shifted)))
    return defects


def iid_seed(base: int, i: int) -> int:
    """Stream seed of the i-th independent oracle draw."""
    return bit_block((base ^ _IID_SALT) & _MASK64, i)


def iid_digits(base: int, count: int) -> np.ndarray:
    """count i.i.d. digits with the stationary marginal law.

    Draw i reads the fresh bit stream seeded by iid_seed(base, i); the
    vector path certifies the digit from the stream's first 64 bits and
    the remainder falls back to the exact scalar lane on that stream.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    streams = splitmix_blocks((base ^ _IID_SALT) & _MASK64, 0, count)
    v = _mix_u64(streams + _U(_GAMMA))  # first 64 bits of each stream
    bl = _bit_length_u64(v)
    j = 64 - bl  # leading zeros
    jc = np.where(j <= 30, j, 0).astype(np.uint64)
    sh = np.minimum(j + 1, 63).astype(np.uint64)
    u = ((v << sh) >> _U(32)) + _U(1 << 32)
    a_num = _U(1) << (jc + _U(33))
    beta = a_num // u
    certified = (j <= 30) & (beta == a_num // (u + _U(1)))
    out = np.where(certified, beta, _U(0)).astype(np.int64)
    for i in np.flatnonzero(~certified):
        out[i] = chi_of_point(BitPoint(int(streams[i])))
    return out
