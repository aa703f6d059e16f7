"""Closed-form quantities of the random regular k-SAT model.

Every function here is a pure function of its arguments.  Moments are
evaluated in the log domain so that ``n`` in the tens of thousands is fine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from regsat.errors import DomainError

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ModelParams:
    """Parameters ``(n, d, k)`` of the regular model; ``m = 2dn/k`` clauses.

    Every variable occurs exactly ``d`` times positively and ``d`` times
    negatively, so the formula has ``2dn = km`` literal slots.
    """

    n: int
    d: int
    k: int

    def __post_init__(self):
        for name in ("n", "d", "k"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise DomainError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.k < 2:
            raise DomainError(f"k must be at least 2, got {self.k}")
        if self.d < 1:
            raise DomainError(f"d must be at least 1, got {self.d}")
        if self.n < self.k:
            raise DomainError(f"n must be at least k={self.k}, got {self.n}")
        if (2 * self.d * self.n) % self.k:
            raise DomainError(
                f"k must divide 2dn (k={self.k}, 2dn={2 * self.d * self.n})")

    @property
    def m(self) -> int:
        return 2 * self.d * self.n // self.k

    @property
    def slots(self) -> int:
        return 2 * self.d * self.n

    def as_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "k": self.k, "m": self.m}


def _q_residual(q: float, k: int) -> float:
    return 2.0 * q - 1.0 + (1.0 - q) ** k


def solve_q(k: int) -> float:
    """Root of ``2q = 1 - (1-q)^k`` in ``(0, 1/2]``.

    ``q = 0`` always solves the equation; for ``k >= 3`` the residual is
    negative on ``(0, q*)`` so ``[1/4, 1/2]`` brackets the nontrivial root.
    For ``k = 2`` the equation collapses to ``q^2 = 0`` and 0 is returned.
    """
    if isinstance(k, bool) or int(k) != k or k < 2:
        raise DomainError(f"solve_q needs an integer k >= 2, got {k!r}")
    k = int(k)
    if k == 2:
        return 0.0
    lo, hi = 0.25, 0.5
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if _q_residual(mid, k) < 0.0:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    for _ in range(60):
        r = _q_residual(q, k)
        if abs(r) <= 1e-15:
            break
        step = r / (2.0 - k * (1.0 - q) ** (k - 1))
        q_new = min(q - step, 0.5)
        if q_new == q:
            break
        q = q_new
    return q


def _require_positive_q(k: int) -> float:
    q = solve_q(k)
    if q <= 0.0:
        raise DomainError(f"q(k) vanishes for k={k}; the tilted quantities need k >= 3")
    return q


def log_first_moment(params: ModelParams) -> float:
    """Log of ``2^n (1-(1-q)^k)^(m+1/2) (4q(1-q))^(-dn-1/2)``."""
    n, d, k, m = params.n, params.d, params.k, params.m
    q = _require_positive_q(k)
    return (n * LN2 + (m + 0.5) * math.log1p(-((1.0 - q) ** k))
            - (d * n + 0.5) * math.log(4.0 * q * (1.0 - q)))


def log_normalizer(params: ModelParams) -> float:
    """Log of the deterministic factor multiplying ``Z`` in the limit theorem."""
    return -log_first_moment(params)


def first_moment_rate(k: int, d: float) -> float:
    """Per-variable exponent ``ln 2 + (2d/k) ln(2q) - d ln(4q(1-q))``."""
    q = _require_positive_q(k)
    return LN2 + (2.0 * d / k) * math.log(2.0 * q) - d * math.log(4.0 * q * (1.0 - q))


class EventProbabilities(NamedTuple):
    P_S: float
    P_B: float
    P_B_given_S: float


def _log_binom(a: int, b: int) -> float:
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def log_event_probabilities(params: ModelParams) -> EventProbabilities:
    """Natural logs of the three quantities of :func:`event_probabilities`."""
    d, k, m, n = params.d, params.k, params.m, params.n
    q = _require_positive_q(k)
    p_clause = 1.0 - (1.0 - q) ** k
    log_ps = m * math.log(p_clause)
    log_pb = _log_binom(k * m, d * n) + d * n * (math.log(q) + math.log1p(-q))
    log_pbs = 0.5 * (math.log(p_clause) - math.log(2.0 * math.pi * k * m * q * (1.0 - q)))
    return EventProbabilities(log_ps, log_pb, log_pbs)


def event_probabilities(params: ModelParams) -> EventProbabilities:
    """Probabilities of the auxiliary events for i.i.d. slot truth values.

    ``P_S`` (every clause has a true slot) and ``P_B`` (exactly ``dn`` true
    slots) are exact; ``P_B_given_S`` is the local-limit approximation used
    for the first moment.  ``P_S`` may underflow for very large ``m``; use
    :func:`log_event_probabilities` there.
    """
    logs = log_event_probabilities(params)
    return EventProbabilities(*(math.exp(x) for x in logs))


def log_first_moment_bayes(params: ModelParams) -> float:
    """``ln(2^n P[S] P[B|S] / P[B])``: the Bayes-rule route to ``E[Z]``."""
    ev = log_event_probabilities(params)
    return params.n * LN2 + ev.P_S + ev.P_B_given_S - ev.P_B


def exact_log_first_moment(params: ModelParams) -> float:
    """Exact ``ln E[Z]`` at finite ``n``.

    A fixed assignment sees a uniformly random balanced vector of slot truth
    values, so ``E[Z] = 2^n [x^dn]((1+x)^k - 1)^m / C(km, dn)``.  The
    coefficient is expanded by inclusion-exclusion in exact integers.
    """
    n, d, k, m = params.n, params.d, params.k, params.m
    if k * m > 20000:
        raise DomainError("exact first moment limited to km <= 20000")
    target = d * n
    coef = 0
    for j in range(m + 1):
        term = math.comb(m, j) * math.comb(k * j, target)
        coef += -term if (m - j) % 2 else term
    if coef <= 0:
        return -math.inf
    return n * LN2 + math.log(coef) - math.log(math.comb(k * m, target))


def truncated_binomial_variance(k: int) -> float:
    """Variance of the number of true slots in a clause given at least one."""
    q = _require_positive_q(k)
    p_sat = 1.0 - (1.0 - q) ** k
    mean = k * q / p_sat
    second = (k * q * (1.0 - q) + (k * q) ** 2) / p_sat
    return second - mean * mean


def log_first_moment_llt(params: ModelParams) -> float:
    """``ln E[Z]`` to ``1 + o(1)`` with the exact truncated-binomial variance.

    Same Bayes-rule route as :func:`log_first_moment_bayes`, but the local
    limit theorem uses the variance of a binomial conditioned to be
    positive.  Only the ``O(1)`` constant differs from
    :func:`log_first_moment`; the ratio of the two tends to
    ``sqrt(k(1-q)/2 / truncated_binomial_variance(k))``.
    """
    ev = log_event_probabilities(params)
    var = params.m * truncated_binomial_variance(params.k)
    return (params.n * LN2 + ev.P_S - ev.P_B
            - 0.5 * math.log(2.0 * math.pi * var))


def pattern_code(sigma: Sequence[int]) -> int:
    """Encode a truth-value pattern (entries +-1) with bit ``j`` set iff ``sigma[j] = +1``."""
    code = 0
    for j, v in enumerate(sigma):
        if v not in (1, -1):
            raise DomainError(f"pattern entries must be +1 or -1, got {v!r}")
        if v == 1:
            code |= 1 << j
    return code


def pattern_from_code(code: int, k: int) -> tuple[int, ...]:
    return tuple(1 if (code >> j) & 1 else -1 for j in range(k))


def bar_mu(k: int, sigma: Sequence[int] | int) -> float:
    """Tilted clause-pattern law ``mu_bar(sigma)`` on satisfying patterns."""
    code = sigma if isinstance(sigma, (int, np.integer)) else pattern_code(sigma)
    if isinstance(sigma, (int, np.integer)) and not 0 <= code < (1 << k):
        raise DomainError(f"pattern code {code} out of range for k={k}")
    if not isinstance(sigma, (int, np.integer)) and len(sigma) != k:
        raise DomainError(f"pattern must have length k={k}")
    if code == 0:
        raise DomainError("the all-false pattern does not satisfy a clause")
    q = _require_positive_q(k)
    total = 2 * bin(int(code)).count("1") - k
    log_val = (0.5 * k * math.log(q * (1.0 - q)) - math.log1p(-((1.0 - q) ** k))
               + 0.5 * total * (math.log(q) - math.log1p(-q)))
    return math.exp(log_val)


def bar_mu_vector(k: int) -> np.ndarray:
    """``mu_bar`` indexed by pattern code; entry 0 (all false) is 0."""
    out = np.zeros(1 << k)
    for code in range(1, 1 << k):
        out[code] = bar_mu(k, code)
    return out


def kl_divergence(p, r) -> float:
    """``sum_x p_x ln(p_x / r_x)`` with ``0 ln 0 = 0 ln(0/0) = 0``.

    Returns ``inf`` when ``p`` charges a point where ``r`` vanishes.
    """
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    if p.shape != r.shape:
        raise DomainError("distributions must share an index set")
    support = p > 0
    if np.any(r[support] <= 0):
        return math.inf
    val = float(np.sum(p[support] * (np.log(p[support]) - np.log(r[support]))))
    return max(val, 0.0)


def nu_sq(k: int) -> float:
    """Limiting ``Var(A)/m`` of the paired-pattern overlap statistic."""
    if k < 2:
        raise DomainError("nu_sq needs k >= 2")
    q = solve_q(k)
    return k / 16.0 * (k - 4.0 * (k - 1) * q * (1.0 - q))


class ThresholdInfo(NamedTuple):
    asymptotic_threshold: float
    max_2d_over_k: float
    condition_holds: Callable[[float], bool]


def threshold_info(k: int) -> ThresholdInfo:
    """Large-k satisfiability threshold for ``2d/k`` and the degree cap of the limit theorem."""
    if k < 2:
        raise DomainError("threshold_info needs k >= 2")
    base = 2.0 ** k * LN2 - k * LN2 / 2.0
    cap = base - 4.0
    return ThresholdInfo(base - (1.0 + LN2) / 2.0, cap, lambda d: 2.0 * d / k <= cap)


def max_admissible_degree(k: int) -> float:
    """Largest real ``d`` with ``2d/k`` at the cap (not rounded to an integer)."""
    return k * threshold_info(k).max_2d_over_k / 2.0


def cycle_growth(k: int, d: float) -> float:
    """``(2d-1)(k-1)(1-4q(1-q))``, the ratio of the cycle series."""
    q = solve_q(k)
    return (2.0 * d - 1.0) * (k - 1) * (1.0 - 4.0 * q * (1.0 - q))


def _checked_growth(k: int, d: float) -> float:
    x = cycle_growth(k, d)
    if not x < 1.0:
        raise DomainError(
            f"series diverges: (2d-1)(k-1)(1-4q(1-q))<1 fails, value {x:.6g} "
            f"at k={k}, d={d}")
    return x


def cycle_series_sum(k: int, d: float) -> float:
    """Closed form of ``sum_s lambda_s delta_s^2`` over all cycle lengths."""
    return -0.5 * math.log1p(-_checked_growth(k, d))


class SeriesDiagnostic(NamedTuple):
    partial_sum: float
    tail_bound: float
    closed_form: float


def cycle_series_partial(k: int, d: float, max_len: int, rates=None) -> SeriesDiagnostic:
    """Truncated pattern sum up to ``l = max_len`` with its geometric tail bound.

    With ``rates`` given the partial sum runs over the tabulated patterns;
    otherwise over the per-length closed form ``x^l / (2l)``.
    """
    x = _checked_growth(k, d)
    if rates is not None:
        partial = sum(float(np.dot(rates.lam[l - 1], rates.delta[l - 1] ** 2))
                      for l in range(1, max_len + 1))
    else:
        partial = sum(x ** l / (2 * l) for l in range(1, max_len + 1))
    tail = x ** (max_len + 1) / (2.0 * (max_len + 1) * (1.0 - x))
    return SeriesDiagnostic(partial, tail, -0.5 * math.log1p(-x))


def second_moment_limit(k: int, d: float) -> float:
    """``(1 - (2d-1)(k-1)(1-4q(1-q)))^(-1/2)``."""
    return (1.0 - _checked_growth(k, d)) ** -0.5
