"""Estimators, Poisson tests and the limit-variable sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field
from typing import NamedTuple

import numpy as np
from scipy import stats as sps

from regsat.analytic.rates import RateTable
from regsat.errors import DomainError
from regsat.rng import as_generator

P_FLOOR = 1e-15
MIN_GOF_OBS = 100
MIN_EXPECTED = 5.0
INVERSION_MAX_RATE = 10.0


class Estimate(NamedTuple):
    value: float
    se: float


def falling_factorial(x, r: int):
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    for i in range(r):
        out = out * (x - i)
    return out


def jackknife_mean_se(values) -> float:
    """Leave-one-out jackknife standard error of the sample mean of ``values``."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        return 0.0
    loo = (values.sum() - values) / (n - 1)
    return float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def factorial_moment(samples, r: int) -> Estimate:
    """Mean of ``x(x-1)...(x-r+1)`` with a jackknife standard error."""
    if not 1 <= r <= 3:
        raise DomainError(f"factorial moments supported for r in 1..3, got {r}")
    vals = falling_factorial(samples, r)
    return Estimate(float(vals.mean()), jackknife_mean_se(vals))


@dataclass(frozen=True)
class MomentReport:
    sample_count: int
    mean: float
    variance: float
    standard_error: float
    factorial_moments: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["var"] = out.pop("variance")
        out["se"] = out.pop("standard_error")
        out["factorial_moments"] = {str(r): {"value": e[0], "se": e[1]}
                                    for r, e in self.factorial_moments.items()}
        return out


def moment_report(samples, max_order: int = 3) -> MomentReport:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DomainError("moment_report needs at least one sample")
    var = float(x.var(ddof=1)) if x.size > 1 else 0.0
    fm = {r: factorial_moment(x, r) for r in range(1, max_order + 1)}
    return MomentReport(int(x.size), float(x.mean()), var, math.sqrt(var / x.size), fm)


class GofResult(NamedTuple):
    chi_sq: float
    dof: int
    p_value: float

    def to_dict(self) -> dict:
        return {"chi_sq": self.chi_sq, "dof": self.dof, "p": self.p_value}


def _histogram(observed) -> np.ndarray:
    obs = np.asarray(observed)
    if obs.dtype.kind == "f" and np.any(obs != np.round(obs)):
        raise DomainError("observed histogram must contain integer counts")
    return obs.astype(np.int64)


def poisson_gof(observed, rate: float) -> GofResult:
    """Chi-square test of a count histogram against Poisson(``rate``).

    ``observed[c]`` is the number of samples equal to ``c``.  Cells are merged
    left to right until each has expected count at least 5; the open upper
    tail is folded into the last cell.  The rate is known, so
    ``dof = cells - 1``.  p-values are floored at 1e-15.
    """
    obs = _histogram(observed)
    total = int(obs.sum())
    if total < MIN_GOF_OBS:
        raise DomainError(f"poisson_gof needs at least {MIN_GOF_OBS} observations, got {total}")
    if rate <= 0:
        raise DomainError("Poisson rate must be positive")
    cells_obs, cells_exp = [], []
    cur_obs, cur_exp = 0, 0.0
    c = 0
    while True:
        cur_obs += int(obs[c]) if c < obs.size else 0
        cur_exp += total * sps.poisson.pmf(c, rate)
        tail_exp = total * sps.poisson.sf(c, rate)
        if tail_exp < MIN_EXPECTED:
            cur_obs += int(obs[c + 1:].sum())
            cur_exp += tail_exp
            if cur_exp < MIN_EXPECTED and cells_obs:
                cells_obs[-1] += cur_obs
                cells_exp[-1] += cur_exp
            else:
                cells_obs.append(cur_obs)
                cells_exp.append(cur_exp)
            break
        if cur_exp >= MIN_EXPECTED:
            cells_obs.append(cur_obs)
            cells_exp.append(cur_exp)
            cur_obs, cur_exp = 0, 0.0
        c += 1
    o = np.array(cells_obs, dtype=float)
    e = np.array(cells_exp)
    dof = len(cells_obs) - 1
    chi_sq = float(np.sum((o - e) ** 2 / e))
    if dof < 1:
        return GofResult(chi_sq, 0, 1.0)
    return GofResult(chi_sq, dof, max(float(sps.chi2.sf(chi_sq, dof)), P_FLOOR))


def poisson_gof_samples(samples, rate: float) -> GofResult:
    return poisson_gof(np.bincount(np.asarray(samples, dtype=np.int64)), rate)


def poisson_inversion(rate: float, size, rng=None) -> np.ndarray:
    """Poisson draws by inverting the cdf (rates below 10; larger rates use numpy)."""
    rng = as_generator(rng)
    if rate < 0:
        raise DomainError("Poisson rate must be nonnegative")
    if rate == 0:
        return np.zeros(size, dtype=np.int64)
    if rate >= INVERSION_MAX_RATE:
        return rng.poisson(rate, size).astype(np.int64)
    kmax = int(rate + 12.0 * math.sqrt(rate) + 30)
    cdf = np.cumsum(sps.poisson.pmf(np.arange(kmax + 1), rate))
    u = rng.random(size)
    return np.minimum(np.searchsorted(cdf, u, side="right"), kmax).astype(np.int64)


def _pattern_rates(rates: RateTable, ell: int):
    if not 0 <= ell <= rates.max_len:
        raise DomainError(f"rate table reaches l={rates.max_len}, asked for {ell}")
    lam = np.concatenate([rates.lam[l - 1] for l in range(1, ell + 1)]) if ell else np.zeros(0)
    delta = np.concatenate([rates.delta[l - 1] for l in range(1, ell + 1)]) if ell else np.zeros(0)
    return lam, delta


def simulate_poisson_census(rates: RateTable, ell: int, size: int, rng=None) -> np.ndarray:
    """``(size, patterns)`` array of independent Poisson(``lambda_s``) counts, l <= ell."""
    rng = as_generator(rng)
    lam, _ = _pattern_rates(rates, ell)
    out = np.empty((size, lam.size), dtype=np.int64)
    for j, rate in enumerate(lam):
        out[:, j] = poisson_inversion(float(rate), size, rng)
    return out


def sample_log_w(rates: RateTable, ell: int, rng=None, size: int | None = None):
    """``ln W_ell`` draws: ``sum_s Lambda_s ln(1+delta_s) - lambda_s delta_s``."""
    rng = as_generator(rng)
    lam, delta = _pattern_rates(rates, ell)
    n = 1 if size is None else int(size)
    log_terms = np.log1p(delta)
    offset = float(np.dot(lam, delta))
    out = np.full(n, -offset)
    for j, rate in enumerate(lam):
        out += poisson_inversion(float(rate), n, rng) * log_terms[j]
    return float(out[0]) if size is None else out


def sample_w(rates: RateTable, ell: int, rng=None, size: int | None = None):
    """Draws of ``prod_s (1+delta_s)^Lambda_s exp(-lambda_s delta_s)`` over patterns with l <= ell."""
    val = sample_log_w(rates, ell, rng, size)
    return math.exp(val) if size is None else np.exp(val)


class KsResult(NamedTuple):
    statistic: float
    critical: float
    p_value: float
    passed: bool


def ks_critical(alpha: float, n: int, m: int) -> float:
    """Large-sample two-sample Kolmogorov-Smirnov critical value."""
    return math.sqrt(-math.log(alpha / 2.0) / 2.0) * math.sqrt((n + m) / (n * m))


def ks_two_sample(x, y, alpha: float = 1e-3) -> KsResult:
    res = sps.ks_2samp(np.asarray(x), np.asarray(y))
    crit = ks_critical(alpha, len(x), len(y))
    return KsResult(float(res.statistic), crit, max(float(res.pvalue), P_FLOOR),
                    bool(res.statistic < crit))


def ratio_of_moments(z) -> Estimate:
    """``mean(Z^2) / mean(Z)^2`` with a jackknife standard error."""
    z = np.asarray(z, dtype=float)
    n = z.size
    if n < 2:
        raise DomainError("need at least two samples")
    s1, s2 = z.sum(), (z * z).sum()
    est = (s2 / n) / (s1 / n) ** 2
    loo = ((s2 - z * z) / (n - 1)) / ((s1 - z) / (n - 1)) ** 2
    se = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return Estimate(float(est), float(se))
