"""Exact solution counts, the pattern decomposition and overlap censuses."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from regsat import _kernels
from regsat.analytic.core import bar_mu_vector, log_normalizer
from regsat.errors import DomainError, ResourceError
from regsat.model import Assignment, Formula, PairedPatternArray

MAX_COUNT_N = 28
MAX_SOLUTIONS = 10 ** 6
_SALT_SEED = 0x5EED_C0DE


def evaluate(formula: Formula, assignment: Assignment):
    """Return ``(satisfied, codes)``; bit ``j`` of ``codes[i]`` is set iff slot ``(i, j)`` is true."""
    p = formula.params
    if assignment.n != p.n:
        raise DomainError(f"assignment has length {assignment.n}, formula has n={p.n}")
    spins = assignment.spins()
    true = (formula.sign * spins[formula.var]) > 0
    codes = (true.reshape(p.m, p.k).astype(np.int64) << np.arange(p.k)).sum(axis=1)
    return bool(np.all(codes != 0)), codes


def count_naive(formula: Formula) -> int:
    """Reference count by evaluating every assignment independently."""
    n = formula.params.n
    _check_cap(n, MAX_COUNT_N)
    z = 0
    for mask in range(1 << n):
        sat, _ = evaluate(formula, Assignment.from_int(mask, n))
        z += sat
    return z


def histogram_naive(formula: Formula) -> dict:
    """Reference pattern histogram: key tuple of ``(code, count)`` pairs to ``Z_mu``."""
    n, k = formula.params.n, formula.params.k
    out: dict = {}
    for mask in range(1 << n):
        sat, codes = evaluate(formula, Assignment.from_int(mask, n))
        if sat:
            hist = np.bincount(codes, minlength=1 << k)
            key = tuple((int(c), int(hist[c])) for c in np.flatnonzero(hist))
            out[key] = out.get(key, 0) + 1
    return out


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise ResourceError(
            f"exact enumeration over 2^{n} assignments exceeds the cap n <= {cap}; "
            "use Monte Carlo mode or raise the cap explicitly")


def _kernel_args(formula: Formula):
    p = formula.params
    return (p.n, p.m, p.k, np.ascontiguousarray(formula.sign),
            np.ascontiguousarray(formula.var_slots()))


@dataclass(frozen=True)
class PatternHistogram:
    """``Z_mu`` for every clause-pattern histogram ``mu`` realized by a solution.

    Keys are tuples of ``(code, count)`` pairs sorted by code; counts sum to ``m``.
    """

    k: int
    m: int
    entries: dict

    @property
    def total(self) -> int:
        return sum(self.entries.values())

    def balance_ok(self) -> bool:
        for key in self.entries:
            if sum(cnt * (2 * bin(code).count("1") - self.k) for code, cnt in key) != 0:
                return False
        return True

    def distance_to_bar_mu(self, key) -> float:
        mu = np.zeros(1 << self.k)
        for code, cnt in key:
            mu[code] = cnt / self.m
        return float(np.linalg.norm(mu - bar_mu_vector(self.k)))

    def window(self, omega: float = 3.0) -> dict:
        """Entries with ``||mu - mu_bar||_2 <= omega / sqrt(m)``."""
        radius = omega / math.sqrt(self.m)
        return {key: z for key, z in self.entries.items()
                if self.distance_to_bar_mu(key) <= radius}

    def to_list(self) -> list:
        return [{"mu": [list(pair) for pair in key], "z_mu": str(z)}
                for key, z in sorted(self.entries.items())]


def count_all(formula: Formula, want_histogram: bool = False, max_n: int = MAX_COUNT_N):
    """Exact ``Z`` by Gray-code enumeration, optionally with the pattern histogram.

    Returns ``(Z, histogram)`` with ``histogram`` None unless requested.
    """
    p = formula.params
    _check_cap(p.n, max_n)
    if p.n > 62:
        raise ResourceError("enumeration limited to n <= 62 by 64-bit step counters")
    args = _kernel_args(formula)
    if not want_histogram:
        return int(_kernels.gray_count(*args)), None
    salts = np.random.default_rng(_SALT_SEED).integers(
        0, np.iinfo(np.uint64).max, size=1 << p.k, dtype=np.uint64, endpoint=True)
    keys, vals = _kernels.gray_histogram(*args, salts)
    entries = {}
    for row, z in zip(keys, vals):
        nz = np.flatnonzero(row)
        entries[tuple((int(c), int(row[c])) for c in nz)] = int(z)
    hist = PatternHistogram(p.k, p.m, entries)
    return hist.total, hist


def normalized_log_count(formula: Formula, z: int) -> float:
    """``ln Z + log_normalizer``; ``-inf`` when ``Z = 0``."""
    if z <= 0:
        return -math.inf
    return math.log(z) + log_normalizer(formula.params)


def satisfying_assignments(formula: Formula, cap: int = MAX_SOLUTIONS,
                           max_n: int = MAX_COUNT_N) -> np.ndarray:
    p = formula.params
    _check_cap(p.n, max_n)
    sols = _kernels.gray_solutions(*_kernel_args(formula), cap)
    if sols.shape[0] > cap:
        raise ResourceError(f"more than {cap} satisfying assignments; overlap census aborted")
    return sols


def overlap_census(formula: Formula, cap: int = MAX_SOLUTIONS,
                   max_n: int = MAX_COUNT_N) -> np.ndarray:
    """``N[a]`` = ordered pairs of solutions agreeing on exactly ``a`` variables."""
    sols = satisfying_assignments(formula, cap, max_n)
    return _kernels.overlap_pairs(sols, formula.params.n)


def a_statistic(paired: PairedPatternArray) -> int:
    """Number of positions where both arrays are true."""
    both = np.bitwise_and(paired.rows1, paired.rows2)
    return int(sum(int(np.sum((both >> j) & 1)) for j in range(paired.k)))


def census_to_json(z: int, histogram: PatternHistogram | None = None, overlap=None) -> str:
    obj: dict = {"Z": str(z)}
    if histogram is not None:
        obj["histogram"] = histogram.to_list()
    if overlap is not None:
        obj["overlap"] = [int(x) for x in overlap]
    return json.dumps(obj)
