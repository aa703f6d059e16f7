"""Monte Carlo campaigns with per-replicate streams and claim checks.

Each campaign returns ``(report, rows)``: a JSON-ready report with one entry
per checked claim, and per-replicate ``(replicate, statistic, value)`` rows
for CSV export.
"""

from __future__ import annotations

import datetime as _dt
import math
import os
import subprocess
import time
from dataclasses import dataclass, field, asdict

import numpy as np
from joblib import Parallel, delayed

import regsat
from regsat.analytic import core, overlap
from regsat.analytic.rates import code_to_string, rate_table
from regsat.counting import a_statistic, count_all, MAX_COUNT_N
from regsat.cycles import MAX_CENSUS_LEN, cycle_census, u_statistic, CycleCensus
from regsat.errors import DomainError, ResourceError
from regsat.model import round_bar_mu, sample_formula, sample_paired_patterns, sample_planted
from regsat.rng import replicate_rng
from regsat import stats

REPORT_SCHEMA = "regsat-report/1"
DEFAULT_CAPS = {"n": MAX_COUNT_N, "L": 4, "N": 10 ** 6}


def default_workers() -> int:
    env = os.environ.get("REGSAT_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise DomainError(f"REGSAT_WORKERS must be an integer, got {env!r}") from exc
        if value < 1:
            raise DomainError("REGSAT_WORKERS must be at least 1")
        return value
    return os.cpu_count() or 1


def version_string() -> str:
    base = regsat.__version__
    try:
        here = os.path.dirname(os.path.abspath(__file__))
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{base}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return base


@dataclass
class ExperimentConfig:
    experiment: str
    n: int | None = None
    d: float | None = None
    k: int | None = None
    reps: int = 1
    seed: int = 0
    max_len: int = 1
    omega: float = 3.0
    workers: int = 1
    unsafe_caps: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reps < 1:
            raise DomainError("replicate count must be at least 1")
        if self.workers < 1:
            raise DomainError("worker count must be at least 1")
        if not 0 <= self.seed < 1 << 64:
            raise DomainError("master seed must be a 64-bit unsigned integer")
        if not self.unsafe_caps:
            if self.reps > DEFAULT_CAPS["N"]:
                raise ResourceError(f"reps={self.reps} above cap {DEFAULT_CAPS['N']}; "
                                    "pass --unsafe-caps to override")
            if self.max_len > DEFAULT_CAPS["L"]:
                raise ResourceError(f"max-len={self.max_len} above cap {DEFAULT_CAPS['L']}; "
                                    "pass --unsafe-caps to override")

    def params(self) -> core.ModelParams:
        return core.ModelParams(self.n, int(self.d), self.k)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("workers")
        return out


def map_replicates(func, reps: int, seed: int, workers: int = 1, args=()) -> list:
    """``[func(replicate_rng(seed, r), *args) for r in range(reps)]`` possibly in parallel.

    Replicates are split into contiguous blocks and the results are
    concatenated in replicate order, so output does not depend on ``workers``.
    """
    if workers <= 1 or reps < 2:
        return [func(replicate_rng(seed, r), *args) for r in range(reps)]
    blocks = np.array_split(np.arange(reps), min(workers * 4, reps))
    parts = Parallel(n_jobs=workers)(
        delayed(_run_block)(func, seed, int(b[0]), int(b[-1]) + 1, args) for b in blocks if b.size)
    return [x for part in parts for x in part]


def _run_block(func, seed, lo, hi, args):
    return [func(replicate_rng(seed, r), *args) for r in range(lo, hi)]


def claim(name: str, value, target, tolerance, passed: bool, detail: str = "") -> dict:
    return {"name": name, "value": value, "target": target, "tolerance": tolerance,
            "pass": bool(passed), "detail": detail}


def finish_report(config: ExperimentConfig, claims: list, results: dict, started: float,
                  cites: str) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "experiment": config.experiment,
        "claim_under_test": cites,
        "config": config.to_dict(),
        "version": version_string(),
        "claims": claims,
        "status": "PASS" if all(c["pass"] for c in claims) else "FAIL",
        "results": results,
        "timestamp": {
            "utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "wall_clock_s": round(time.time() - started, 3),
        },
    }


def _check_count_cap(config: ExperimentConfig) -> None:
    if config.n > DEFAULT_CAPS["n"] and not config.unsafe_caps:
        raise ResourceError(f"n={config.n} above exact-count cap {DEFAULT_CAPS['n']}; "
                            "pass --unsafe-caps to override")


def _count_replicate(rng, params, max_n):
    return count_all(sample_formula(params, rng), max_n=max_n)[0]


def _solution_counts(config: ExperimentConfig) -> np.ndarray:
    _check_count_cap(config)
    params = config.params()
    max_n = max(config.n, MAX_COUNT_N)
    z = map_replicates(_count_replicate, config.reps, config.seed, config.workers,
                       (params, max_n))
    return np.asarray(z, dtype=np.int64)


def first_moment(config: ExperimentConfig):
    """Empirical mean of ``Z`` against the closed-form first moment."""
    started = time.time()
    params = config.params()
    z = _solution_counts(config).astype(float)
    predicted = math.exp(core.log_first_moment(params))
    mean = float(z.mean())
    rel_se = float(z.std(ddof=1) / math.sqrt(z.size) / mean) if z.size > 1 and mean > 0 else math.inf
    ratio = mean / predicted
    tol = max(3.0 * rel_se, 0.02)
    claims = [claim("mean_Z_over_first_moment", ratio, 1.0, tol, abs(ratio - 1.0) <= tol,
                    "closed-form asymptotic first moment")]
    results = {"mean_Z": mean, "rel_se": rel_se, "predicted": predicted, "ratio": ratio}
    if params.k * params.m <= 20000:
        exact = math.exp(core.exact_log_first_moment(params))
        ratio_exact = mean / exact
        claims.append(claim("mean_Z_over_exact_finite_n", ratio_exact, 1.0, 3.0 * rel_se,
                            abs(ratio_exact - 1.0) <= 3.0 * rel_se,
                            "diagnostic: exact finite-n expectation"))
        results["exact_finite_n"] = exact
        results["exact_over_closed_form"] = exact / predicted
    rows = [(r, "Z", int(v)) for r, v in enumerate(z)]
    return finish_report(config, claims, results, started,
                         "first moment of the solution count"), rows


def _census_replicate(rng, params, L, planted):
    if planted:
        formula, _ = sample_planted(params, rng)
    else:
        formula = sample_formula(params, rng)
    census = cycle_census(formula, L)
    return np.concatenate(census.counts)


def _pattern_labels(L: int) -> list[str]:
    return [code_to_string(l, c) for l in range(1, L + 1) for c in range(1 << (2 * l))]


def _census_matrix(config: ExperimentConfig, planted: bool) -> np.ndarray:
    if not 1 <= config.max_len <= MAX_CENSUS_LEN:
        raise DomainError(f"max-len must be in 1..{MAX_CENSUS_LEN}")
    params = config.params()
    out = map_replicates(_census_replicate, config.reps, config.seed, config.workers,
                         (params, config.max_len, planted))
    return np.vstack(out)


def cycle_poisson(config: ExperimentConfig, sigmas: float = 4.0, fm_sigmas: float = 5.0,
                  min_p: float = 1e-3):
    """Cycle counts of uniform formulas against independent Poisson(``lambda_s``)."""
    started = time.time()
    counts = _census_matrix(config, planted=False)
    rates = rate_table(config.k, int(config.d), config.max_len)
    lam = np.concatenate(rates.lam)
    labels = _pattern_labels(config.max_len)
    claims, per_pattern = [], {}
    for j, label in enumerate(labels):
        col = counts[:, j]
        mom = stats.moment_report(col, max_order=2)
        target = float(lam[j])
        entry = {"lambda": target, "mean": mom.mean, "se": mom.standard_error,
                 "var": mom.variance}
        claims.append(claim(f"mean[{label}]", mom.mean, target, sigmas * mom.standard_error,
                            abs(mom.mean - target) <= sigmas * mom.standard_error))
        fm2 = mom.factorial_moments[2]
        entry["factorial_2"] = {"value": fm2.value, "se": fm2.se, "target": target ** 2}
        claims.append(claim(f"factorial2[{label}]", fm2.value, target ** 2, fm_sigmas * fm2.se,
                            abs(fm2.value - target ** 2) <= fm_sigmas * fm2.se))
        if target > 0 and col.size >= stats.MIN_GOF_OBS:
            gof = stats.poisson_gof_samples(col, target)
            entry["gof"] = gof.to_dict()
            claims.append(claim(f"gof[{label}]", gof.p_value, min_p, None, gof.p_value >= min_p))
        per_pattern[label] = entry
    rows = [(r, label, int(counts[r, j])) for r in range(counts.shape[0])
            for j, label in enumerate(labels)]
    return finish_report(config, claims, {"patterns": per_pattern}, started,
                         "Poisson limit of signed cycle counts"), rows


def planted_cycles(config: ExperimentConfig, sigmas: float = 4.0):
    """Cycle counts of planted formulas against ``(1 + delta_s) lambda_s``."""
    started = time.time()
    counts = _census_matrix(config, planted=True)
    rates = rate_table(config.k, int(config.d), config.max_len)
    target = np.concatenate(rates.lam) * (1.0 + np.concatenate(rates.delta))
    labels = _pattern_labels(config.max_len)
    claims, per_pattern = [], {}
    for j, label in enumerate(labels):
        col = counts[:, j].astype(float)
        mean = float(col.mean())
        se = float(col.std(ddof=1) / math.sqrt(col.size)) if col.size > 1 else math.inf
        per_pattern[label] = {"target": float(target[j]), "mean": mean, "se": se}
        claims.append(claim(f"planted_mean[{label}]", mean, float(target[j]), sigmas * se,
                            abs(mean - target[j]) <= sigmas * se))
    rows = [(r, label, int(counts[r, j])) for r in range(counts.shape[0])
            for j, label in enumerate(labels)]
    return finish_report(config, claims, {"patterns": per_pattern}, started,
                         "tilted cycle rates in the planted model"), rows


def _w_block(rng, rates, ell, size):
    return stats.sample_w(rates, ell, rng, size=size)


def _u_block(rng, rates, ell, size):
    sim = stats.simulate_poisson_census(rates, ell, size, rng)
    widths = [1 << (2 * l) for l in range(1, ell + 1)]
    edges = np.cumsum([0] + widths)
    out = np.empty(size)
    for i in range(size):
        census = CycleCensus(ell, tuple(sim[i, edges[l]:edges[l + 1]] for l in range(ell)))
        out[i] = u_statistic(census, rates, ell)
    return out


def w_moments(config: ExperimentConfig, ell: int, draws: int, ks_draws: int | None = None,
              sigmas: float = 3.0, alpha: float = 1e-3, block: int = 100_000):
    """Moments of the limit variable and a two-route check of its law."""
    started = time.time()
    rates = rate_table(config.k, int(config.d), max(ell, 1))
    nblocks = max(1, math.ceil(draws / block))
    sizes = [min(block, draws - b * block) for b in range(nblocks)]
    parts = [_w_block(replicate_rng(config.seed, b), rates, ell, sizes[b]) for b in range(nblocks)]
    w = np.concatenate(parts)
    mean = float(w.mean())
    se = float(w.std(ddof=1) / math.sqrt(w.size))
    w2 = w * w
    m2 = float(w2.mean())
    se2 = float(w2.std(ddof=1) / math.sqrt(w.size))
    partial = sum(float(np.dot(rates.lam[l - 1], rates.delta[l - 1] ** 2))
                  for l in range(1, ell + 1))
    target2 = math.exp(partial)
    claims = [claim("mean_W", mean, 1.0, sigmas * se, abs(mean - 1.0) <= sigmas * se),
              claim("second_moment_W", m2, target2, sigmas * se2, abs(m2 - target2) <= sigmas * se2)]
    results = {"mean": mean, "se": se, "second_moment": m2, "second_moment_se": se2,
               "partial_series": partial}
    ks_n = ks_draws if ks_draws is not None else min(draws, 100_000)
    if ks_n >= 2:
        log_w = stats.sample_log_w(rates, ell, replicate_rng(config.seed, nblocks + 1), size=ks_n)
        u = _u_block(replicate_rng(config.seed, nblocks + 2), rates, ell, ks_n)
        ks = stats.ks_two_sample(log_w, u, alpha)
        results["ks"] = ks._asdict()
        claims.append(claim("ks_logW_vs_U", ks.statistic, 0.0, ks.critical, ks.passed))
    rows = [(r, "W", float(v)) for r, v in enumerate(w[: min(w.size, 100_000)])]
    return finish_report(config, claims, results, started,
                         "limit variable as a product over Poisson cycle counts"), rows


def _a_replicate(rng, mu, m):
    return a_statistic(sample_paired_patterns(mu, m, rng))


def a_stat(config: ExperimentConfig, m: int, sigmas: float = 4.0, rel_tol: float = 0.10):
    """Mean and variance of the paired-pattern overlap statistic."""
    started = time.time()
    k = config.k
    counts = round_bar_mu(k, m)
    mu = counts / m
    a = np.asarray(map_replicates(_a_replicate, config.reps, config.seed, config.workers,
                                  (mu, m)), dtype=float)
    mean = float(a.mean())
    se = float(a.std(ddof=1) / math.sqrt(a.size))
    var_ratio = float(a.var(ddof=1) / m)
    nu2 = core.nu_sq(k)
    claims = [claim("mean_A", mean, k * m / 4.0, sigmas * se, abs(mean - k * m / 4.0) <= sigmas * se),
              claim("var_A_over_m", var_ratio, nu2, rel_tol * nu2,
                    abs(var_ratio - nu2) <= rel_tol * nu2)]
    results = {"mean": mean, "se": se, "var_over_m": var_ratio, "nu_sq": nu2,
               "rounded_counts": {str(c): int(counts[c]) for c in np.flatnonzero(counts)}}
    rows = [(r, "A", int(v)) for r, v in enumerate(a)]
    return finish_report(config, claims, results, started,
                         "variance of the overlap statistic of paired pattern arrays"), rows


def second_moment(config: ExperimentConfig, band=(1.0, 1.45), near: float = 0.15):
    """Empirical ``E[Z^2] / E[Z]^2`` against the limiting constant."""
    started = time.time()
    z = _solution_counts(config)
    est = stats.ratio_of_moments(z)
    limit = core.second_moment_limit(config.k, config.d)
    claims = [claim("ratio_in_band", est.value, list(band), None, band[0] <= est.value <= band[1]),
              claim("ratio_near_limit", est.value, limit, near, abs(est.value - limit) <= near)]
    results = {"ratio": est.value, "se": est.se, "limit": limit,
               "mean_Z": float(z.mean())}
    rows = [(r, "Z", int(v)) for r, v in enumerate(z)]
    return finish_report(config, claims, results, started,
                         "second moment ratio of the solution count"), rows


def overlap_scan(config: ExperimentConfig, rho_grid=None, h: float = 1e-5, grad_tol: float = 1e-6):
    """Exponent functions along ``rho11``, stationarity at 1/4 and the roots of g's map."""
    started = time.time()
    k = config.k
    d = config.d if config.d is not None else core.max_admissible_degree(k)
    grid = list(rho_grid) if rho_grid is not None else list(np.linspace(0.02, 0.48, 24))
    curve = []
    for r in grid:
        ex = overlap.overlap_exponents(k, d, float(r))
        curve.append({"rho11": float(r), "f": ex.f, "g": ex.g, "H": ex.H})
    df = (overlap.f_exponent(k, 0.25 + h) - overlap.f_exponent(k, 0.25 - h)) / (2 * h)
    h_bar = overlap.overlap_solve(k, 0.25).entropy
    claims = [claim("Df_at_bar_rho", df, 0.0, grad_tol, abs(df) <= grad_tol),
              claim("H_at_bar_rho", h_bar, 2 * math.log(2), 1e-12,
                    abs(h_bar - 2 * math.log(2)) <= 1e-12)]
    results = {"d": d, "curve": curve, "Df_bar": df}
    if k >= 8:
        x1, x2 = overlap.g_stationary_points(k, d)
        results["stationary_points"] = [x1, x2]
        lo, hi = 0.8 * 2.0 ** -k, 1.3 * 2.0 ** -k
        claims.append(claim("x1_near_2^-k", x1, [lo, hi], None, lo <= x1 <= hi))
        claims.append(claim("x2_order_lnk_over_k", x2, [0.1, 0.5], None, 0.1 <= x2 <= 0.5))
    rows = [(i, key, row[key]) for i, row in enumerate(curve) for key in ("rho11", "f", "g", "H")]
    return finish_report(config, claims, results, started,
                         "overlap exponent landscape of the second moment"), rows
