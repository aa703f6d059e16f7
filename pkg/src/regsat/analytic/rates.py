"""Signed-cycle rates ``lambda_s`` and tilts ``delta_s``.

A sign pattern of half-length ``l`` is stored as an integer code of ``2l``
bits with ``s_2`` in the most significant position, bit value 1 meaning +1.
Pattern strings use ASCII ``+`` and ``-`` in the same order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from regsat.analytic.core import solve_q, cycle_growth, cycle_series_sum
from regsat.errors import ConsistencyError, DomainError, FormatError

MAX_RATE_LEN = 12
DELTA_TOL = 1e-12


def pattern_to_code(s: Sequence[int]) -> tuple[int, int]:
    """Return ``(l, code)`` for a sign pattern given as a sequence of +-1."""
    if len(s) < 2 or len(s) % 2:
        raise DomainError(f"sign pattern must have even length >= 2, got {len(s)}")
    code = 0
    for v in s:
        if v not in (1, -1):
            raise DomainError(f"sign pattern entries must be +1 or -1, got {v!r}")
        code = (code << 1) | (v == 1)
    return len(s) // 2, code


def code_to_pattern(l: int, code: int) -> tuple[int, ...]:
    return tuple(1 if (code >> (2 * l - 1 - i)) & 1 else -1 for i in range(2 * l))


def code_to_string(l: int, code: int) -> str:
    return "".join("+" if (code >> (2 * l - 1 - i)) & 1 else "-" for i in range(2 * l))


def string_to_code(text: str) -> tuple[int, int]:
    if not text or len(text) % 2 or set(text) - {"+", "-"}:
        raise FormatError(f"bad sign pattern string {text!r}")
    return pattern_to_code([1 if c == "+" else -1 for c in text])


def _pair_mask(l: int) -> int:
    return int("01" * l, 2)


def flip_counts(l: int) -> np.ndarray:
    """``t(s)`` for every code of half-length ``l``."""
    codes = np.arange(1 << (2 * l), dtype=np.int64)
    x = (codes ^ (codes >> 1)) & _pair_mask(l)
    t = np.zeros_like(codes)
    while np.any(x):
        t += x & 1
        x >>= 1
    return t


def flip_count(s: Sequence[int]) -> int:
    return sum(1 for i in range(0, len(s), 2) if s[i] * s[i + 1] == -1)


def transfer_matrices(q: float) -> dict[int, np.ndarray]:
    """The two 2x2 matrices whose trace products give ``1 + delta_s``."""
    p = 1.0 - q
    m_pos = np.array([[q * q, p * p], [q * q, q * q]]) / q
    m_neg = np.array([[p * p, p * p], [q * q, p * p]]) / p
    return {1: m_pos, -1: m_neg}


def delta_trace(s: Sequence[int], q: float) -> float:
    mats = transfer_matrices(q)
    prod = np.eye(2)
    for i in range(0, len(s), 2):
        prod = prod @ mats[s[i] * s[i + 1]]
    return float(np.trace(prod)) - 1.0


def delta_closed(s: Sequence[int], q: float) -> float:
    l = len(s) // 2
    return (-1.0) ** flip_count(s) * (2.0 * q - 1.0) ** l


def lambda_pattern(s: Sequence[int], k: int, d: int) -> float:
    """``lambda_s`` in the form ``(1/2l) ((k-1)/2)^l (d-1)^(l-t) d^t``."""
    l = len(s) // 2
    t = flip_count(s)
    return ((k - 1) / 2.0) ** l * float(d - 1) ** (l - t) * float(d) ** t / (2 * l)


def lambda_pattern_product_form(s: Sequence[int], k: int, d: int) -> float:
    """The same rate written through ``(d(d-1))^(l/2)`` and the sign products (needs d >= 2)."""
    l = len(s) // 2
    ssum = sum(s[i] * s[i + 1] for i in range(0, len(s), 2))
    return ((k - 1) / 2.0) ** l * (d * (d - 1)) ** (l / 2.0) * ((d - 1) / d) ** (ssum / 2.0) / (2 * l)


def lambda_agg_closed(k: int, d: int, l: int, t: int) -> float:
    """``sum of lambda_s`` over patterns with half-length ``l`` and ``t`` flips."""
    return math.comb(l, t) * float(k - 1) ** l * float(d - 1) ** (l - t) * float(d) ** t / (2 * l)


def theorem_lambda_lt(k: int, d: int, l: int, t: int) -> float:
    """Aggregated rate with an extra ``2^-l`` factor.

    It is ``2^-l`` times :func:`lambda_agg_closed`; kept for comparison only.
    """
    return lambda_agg_closed(k, d, l, t) / 2.0 ** l


def delta_lt(k: int, l: int, t: int) -> float:
    q = solve_q(k)
    return (-1.0) ** t * (2.0 * q - 1.0) ** l


def _trace_deltas(l: int, q: float) -> np.ndarray:
    """Trace route for all ``4^l`` patterns, built pair by pair."""
    mats = transfer_matrices(q)
    # Pair value (s_{2i}, s_{2i+1}) bits: 11,00 -> +1 ; 10,01 -> -1.
    by_pair = np.stack([mats[1], mats[-1], mats[-1], mats[1]])
    prods = np.eye(2)[None, :, :]
    for _ in range(l):
        prods = np.einsum("aij,bjk->abik", prods, by_pair).reshape(-1, 2, 2)
    return np.trace(prods, axis1=1, axis2=2) - 1.0


@dataclass(frozen=True)
class RateTable:
    """``lambda_s`` and ``delta_s`` for all patterns up to half-length ``max_len``.

    ``lam[l-1]`` and ``delta[l-1]`` are arrays indexed by pattern code.
    """

    k: int
    d: int
    q: float
    max_len: int
    lam: tuple = field(repr=False)
    delta: tuple = field(repr=False)
    lambda_agg: dict = field(repr=False)
    series_sum: float | None

    def _lookup(self, table, s) -> float:
        l, code = pattern_to_code(s) if not isinstance(s, str) else string_to_code(s)
        if l > self.max_len:
            raise DomainError(f"pattern length {2 * l} beyond table max_len={self.max_len}")
        return float(table[l - 1][code])

    def lambda_of(self, s) -> float:
        return self._lookup(self.lam, s)

    def delta_of(self, s) -> float:
        return self._lookup(self.delta, s)

    def patterns(self, l: int):
        for code in range(1 << (2 * l)):
            yield code_to_string(l, code)

    def to_dict(self) -> dict:
        lam, delta = [], []
        for l in range(1, self.max_len + 1):
            for code in range(1 << (2 * l)):
                key = code_to_string(l, code)
                lam.append({"s": key, "value": float(self.lam[l - 1][code])})
                delta.append({"s": key, "value": float(self.delta[l - 1][code])})
        return {"k": self.k, "d": self.d, "q": self.q, "max_len": self.max_len,
                "lambda": lam, "delta": delta, "series_sum": self.series_sum}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "RateTable":
        try:
            k, d, L = int(obj["k"]), int(obj["d"]), int(obj["max_len"])
            lam = [np.zeros(1 << (2 * l)) for l in range(1, L + 1)]
            delta = [np.zeros(1 << (2 * l)) for l in range(1, L + 1)]
            for dst, key in ((lam, "lambda"), (delta, "delta")):
                for row in obj[key]:
                    l, code = string_to_code(row["s"])
                    dst[l - 1][code] = float(row["value"])
            q = float(obj["q"])
            series = obj.get("series_sum")
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed rate table: {exc}") from exc
        return cls(k, d, q, L, tuple(lam), tuple(delta), _aggregate(lam), series)

    @classmethod
    def from_json(cls, text: str) -> "RateTable":
        return cls.from_dict(json.loads(text))


def _aggregate(lam) -> dict:
    agg = {}
    for l, arr in enumerate(lam, start=1):
        t = flip_counts(l)
        for tt in range(l + 1):
            agg[(l, tt)] = float(arr[t == tt].sum())
    return agg


def rate_table(k: int, d: int, max_len: int) -> RateTable:
    """Tabulate rates for every pattern with half-length at most ``max_len``.

    The tilt is computed through the transfer-matrix trace and through the
    closed form; a disagreement above ``1e-12`` raises ConsistencyError.
    """
    if k < 2 or d < 1:
        raise DomainError(f"rate_table needs k >= 2 and d >= 1, got k={k}, d={d}")
    if not 1 <= max_len <= MAX_RATE_LEN:
        raise DomainError(f"max_len must be in 1..{MAX_RATE_LEN}, got {max_len}")
    q = solve_q(k)
    if q <= 0.0:
        raise DomainError(f"q vanishes at k={k}; transfer matrices undefined")
    lam, delta = [], []
    for l in range(1, max_len + 1):
        t = flip_counts(l)
        lam_l = ((k - 1) / 2.0) ** l * np.power(float(d - 1), l - t) * np.power(float(d), t) / (2 * l)
        closed = np.where(t % 2 == 0, 1.0, -1.0) * (2.0 * q - 1.0) ** l
        traced = _trace_deltas(l, q)
        gap = float(np.max(np.abs(traced - closed)))
        if gap > DELTA_TOL:
            raise ConsistencyError(f"delta routes disagree at l={l}: max gap {gap:.3e}")
        lam_l.setflags(write=False)
        traced.setflags(write=False)
        lam.append(lam_l)
        delta.append(traced)
    series = cycle_series_sum(k, d) if cycle_growth(k, d) < 1.0 else None
    return RateTable(k, d, q, max_len, tuple(lam), tuple(delta), _aggregate(lam), series)
