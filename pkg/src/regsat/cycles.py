"""Signed cycle censuses of the clause/variable factor graph.

A cycle of half-length ``l`` is a slot sequence ``(i_t, j_t)``, ``t = 2..2l+1``:
leave the start clause through slot ``j_2``, reach a variable, re-enter a
new clause through another occurrence of that variable, leave it through a
different slot, and so on until the ``l``-th variable returns to the start
clause through slot ``j_{2l+1}``.  The ``l`` clauses and ``l`` variables
are distinct, the start clause has the smallest index and ``j_2 < j_{2l+1}``.
The sign pattern lists the literal signs of the ``2l`` slots in walk order.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from regsat import _kernels
from regsat.analytic.rates import (RateTable, code_to_string, flip_count,
                                   lambda_pattern, pattern_to_code, string_to_code)
from regsat.errors import DomainError, FormatError, ResourceError
from regsat.model import Formula

MAX_CENSUS_LEN = 8
ORACLE_MAX_LEN = 4
ORACLE_MAX_SLOTS = 2000


@dataclass(frozen=True, eq=False)
class CycleCensus:
    """Exact ``C_s`` for all patterns of half-length ``l <= max_len``.

    ``counts[l-1]`` is an integer array indexed by the ``2l``-bit pattern code
    (``s_2`` most significant, 1 meaning +1).
    """

    max_len: int
    counts: tuple = field(repr=False)

    def count(self, s) -> int:
        l, code = string_to_code(s) if isinstance(s, str) else pattern_to_code(s)
        if l > self.max_len:
            raise DomainError(f"pattern half-length {l} exceeds census max_len={self.max_len}")
        return int(self.counts[l - 1][code])

    def as_dict(self, nonzero_only: bool = True) -> dict:
        out = {}
        for l in range(1, self.max_len + 1):
            for code in range(1 << (2 * l)):
                c = int(self.counts[l - 1][code])
                if c or not nonzero_only:
                    out[code_to_string(l, code)] = c
        return out

    def total(self, l: int) -> int:
        return int(self.counts[l - 1].sum())

    def reversed(self) -> "CycleCensus":
        """Census with every pattern string reversed (the opposite orientation)."""
        rows = []
        for l in range(1, self.max_len + 1):
            codes = np.arange(1 << (2 * l))
            rev = np.zeros_like(codes)
            for b in range(2 * l):
                rev |= ((codes >> b) & 1) << (2 * l - 1 - b)
            row = np.zeros_like(self.counts[l - 1])
            row[rev] = self.counts[l - 1]
            rows.append(row)
        return CycleCensus(self.max_len, tuple(rows))

    def __add__(self, other: "CycleCensus") -> "CycleCensus":
        if other.max_len != self.max_len:
            raise DomainError("censuses must share max_len")
        return CycleCensus(self.max_len, tuple(a + b for a, b in zip(self.counts, other.counts)))

    def __eq__(self, other):
        if not isinstance(other, CycleCensus):
            return NotImplemented
        return self.max_len == other.max_len and all(
            np.array_equal(a, b) for a, b in zip(self.counts, other.counts))

    __hash__ = None

    def to_json(self) -> str:
        return json.dumps({"L": self.max_len, "counts": self.as_dict(nonzero_only=False)})

    @classmethod
    def from_json(cls, text: str) -> "CycleCensus":
        try:
            obj = json.loads(text)
            L = int(obj["L"])
            rows = [np.zeros(1 << (2 * l), dtype=np.int64) for l in range(1, L + 1)]
            for key, value in obj["counts"].items():
                l, code = string_to_code(key)
                rows[l - 1][code] = int(value)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise FormatError(f"malformed census JSON: {exc}") from exc
        return cls(L, tuple(rows))


def _split_rows(raw: np.ndarray, L: int) -> tuple:
    return tuple(raw[l - 1, : 1 << (2 * l)].copy() for l in range(1, L + 1))


def cycle_census(formula: Formula, L: int, both_orientations: bool = False,
                 chunks: int = 1) -> CycleCensus:
    """Depth-first census of all cycles with half-length at most ``L``.

    ``chunks`` splits the start clauses into contiguous ranges whose partial
    counts are summed; the result does not depend on it.  With
    ``both_orientations`` each cycle is also counted in its reverse direction.
    """
    if not 1 <= L <= MAX_CENSUS_LEN:
        raise DomainError(f"census length L must be in 1..{MAX_CENSUS_LEN}, got {L}")
    p = formula.params
    var = np.ascontiguousarray(formula.var)
    sign = np.ascontiguousarray(formula.sign)
    var_slots = np.ascontiguousarray(formula.var_slots())
    bounds = np.linspace(0, p.m, max(1, chunks) + 1).astype(np.int64)
    raw = np.zeros((L, 1 << (2 * L)), dtype=np.int64)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        raw += _kernels.census_dfs(p.m, p.k, p.n, L, var, sign, var_slots, lo, hi)
    census = CycleCensus(L, _split_rows(raw, L))
    if both_orientations:
        census = census + census.reversed()
    return census


def cycle_census_oracle(formula: Formula, L: int) -> CycleCensus:
    """Brute-force census checking the cycle conditions on raw slot sequences.

    Candidate sequences are all ``(a_1, b_1, ..., a_l, b_l)`` where ``a_1`` is
    any slot, ``b_h`` is any slot of the variable at ``a_h`` (itself included)
    and ``a_{h+1}`` is any slot of the clause of ``b_h`` (``b_h`` included).
    Every condition is then tested literally on the full sequence.
    """
    p = formula.params
    if L > ORACLE_MAX_LEN or p.slots > ORACLE_MAX_SLOTS:
        raise ResourceError(
            f"oracle limited to L <= {ORACLE_MAX_LEN} and mk <= {ORACLE_MAX_SLOTS}")
    k = p.k
    var = formula.var.astype(np.int64)
    sign = formula.sign
    var_slots = formula.var_slots()
    clause_slots = np.arange(p.slots).reshape(p.m, k)
    rows = [np.zeros(1 << (2 * l), dtype=np.int64) for l in range(1, L + 1)]
    a_first = np.arange(p.slots)[:, None]
    for l in range(1, L + 1):
        seq = a_first
        for h in range(l):
            b = var_slots[var[seq[:, -1]]]
            seq = np.concatenate([np.repeat(seq, b.shape[1], axis=0), b.reshape(-1, 1)], axis=1)
            if h < l - 1:
                a = clause_slots[seq[:, -1] // k]
                seq = np.concatenate([np.repeat(seq, k, axis=0), a.reshape(-1, 1)], axis=1)
        clause = seq // k
        pos = seq % k
        a_idx = np.arange(0, 2 * l, 2)
        b_idx = a_idx + 1
        ok = clause[:, 2 * l - 1] == clause[:, 0]
        distinct = clause[:, a_idx]
        ok &= np.all(distinct >= distinct[:, :1], axis=1)
        for x in range(l):
            for y in range(x + 1, l):
                ok &= distinct[:, x] != distinct[:, y]
        for h in range(l - 1):
            ok &= clause[:, b_idx[h]] == clause[:, a_idx[h + 1]]
        vars_at = var[seq[:, a_idx]]
        for h in range(l):
            ok &= var[seq[:, b_idx[h]]] == vars_at[:, h]
        for x in range(l):
            for y in range(x + 1, l):
                ok &= vars_at[:, x] != vars_at[:, y]
        ok &= pos[:, 0] < pos[:, 2 * l - 1]
        good = seq[ok]
        bits = (sign[good] > 0).astype(np.int64)
        codes = np.zeros(good.shape[0], dtype=np.int64)
        for t in range(2 * l):
            codes = (codes << 1) | bits[:, t]
        rows[l - 1] += np.bincount(codes, minlength=1 << (2 * l))
    return CycleCensus(L, tuple(rows))


def u_statistic(census: CycleCensus, rates: RateTable, ell: int) -> float:
    """``sum over l <= ell and all s of C_s ln(1 + delta_s) - lambda_s delta_s``."""
    if ell < 0:
        raise DomainError("ell must be nonnegative")
    if ell > census.max_len:
        raise DomainError(f"census only reaches l={census.max_len}, asked for {ell}")
    if ell > rates.max_len:
        raise DomainError(f"rate table only reaches l={rates.max_len}, asked for {ell}")
    total = 0.0
    for l in range(1, ell + 1):
        delta = rates.delta[l - 1]
        if np.any(delta <= -1.0):
            raise DomainError("1 + delta_s must be positive")
        c = census.counts[l - 1]
        total += float(np.dot(c, np.log1p(delta)) - np.dot(rates.lam[l - 1], delta))
    return total


class ISCount(NamedTuple):
    count: int
    closed_form_printed: int
    closed_form_l: int
    matches_printed: bool
    matches_l: bool


def _j_families(k: int, l: int) -> int:
    # Positions: j_2, j_3, ..., j_{2l+1}; constraints j_2 != j_{2l+1}, j_{2h+1} != j_{2h+2}.
    total = 0
    for js in itertools.product(range(k), repeat=2 * l):
        if js[0] == js[-1]:
            continue
        if any(js[2 * h - 1] == js[2 * h] for h in range(1, l)):
            continue
        total += 1
    return total


def _g_families(d: int, s: Sequence[int]) -> int:
    l = len(s) // 2
    total = 0
    for gs in itertools.product(range(d), repeat=2 * l):
        if any(s[2 * h] * s[2 * h + 1] == 1 and gs[2 * h] == gs[2 * h + 1] for h in range(l)):
            continue
        total += 1
    return total


def i_s_enumerate(k: int, d: int, s: Sequence[int]) -> ISCount:
    """Exhaustive size of the walk-encoding family ``I(s)``.

    The slot indices ``j`` and clone indices ``g`` are constrained
    independently, so the family is the product of the two enumerations.
    Both candidate closed forms are reported: exponent ``2l`` on ``k(k-1)``
    and exponent ``l``.
    """
    l, _ = pattern_to_code(s)
    if k * d > 64 or l > 3:
        raise ResourceError("i_s_enumerate limited to k*d <= 64 and l <= 3")
    if k ** (2 * l) > 2 * 10 ** 7 or d ** (2 * l) > 2 * 10 ** 7:
        raise ResourceError(f"enumeration of {k}^{2 * l} slot choices is too large")
    count = _j_families(k, l) * _g_families(d, s)
    t = flip_count(s)
    tail = d ** l * (d - 1) ** (l - t) * d ** t
    printed = (k * (k - 1)) ** (2 * l) * tail
    exp_l = (k * (k - 1)) ** l * tail
    return ISCount(count, printed, exp_l, count == printed, count == exp_l)


def i_s_rate(k: int, d: int, s: Sequence[int]) -> float:
    """``|I(s)| (2kd)^-l / 2l`` from the enumeration."""
    l = len(s) // 2
    return i_s_enumerate(k, d, s).count / (2 * k * d) ** l / (2 * l)


def expected_census_rates(k: int, d: int, L: int) -> dict:
    """``lambda_s`` for every pattern string with half-length at most ``L``."""
    out = {}
    for l in range(1, L + 1):
        for code in range(1 << (2 * l)):
            key = code_to_string(l, code)
            out[key] = lambda_pattern([1 if ch == "+" else -1 for ch in key], k, d)
    return out


def pattern_strings(l: int) -> list[str]:
    return [code_to_string(l, code) for code in range(1 << (2 * l))]


def pattern_signs(text: str) -> tuple[int, ...]:
    return tuple(1 if ch == "+" else -1 for ch in text)

