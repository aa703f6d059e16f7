"""Overlap parametrization and exponent functions for the second moment.

Four-point quantities are ordered ``(1,1), (1,-1), (-1,1), (-1,-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from regsat.analytic.core import solve_q, kl_divergence, pattern_code
from regsat.errors import DomainError, NumericalError

MAX_NEWTON_ITER = 50
RESIDUAL_TOL = 1e-13


def rho_from_rho11(rho11: float) -> np.ndarray:
    if not 0.0 < rho11 < 0.5:
        raise DomainError(f"rho11 must lie in (0, 1/2), got {rho11!r}")
    off = 0.5 - rho11
    return np.array([rho11, off, off, rho11])


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


@dataclass(frozen=True)
class OverlapPoint:
    rho11: float
    rho: tuple
    qmat: tuple
    s: float
    f_val: float
    entropy: float
    residual: float
    iterations: int
    g_val: float | None = None


def _system(x: np.ndarray, k: int, rho11: float):
    """Residuals and Jacobian in the unknowns ``(q11, q1m)``."""
    a, b = x
    c = 1.0 - a - 2.0 * b
    u = c + b
    uk1 = u ** (k - 1)
    ck1 = c ** (k - 1)
    s = 1.0 - 2.0 * u * uk1 + c * ck1
    s_a = 2.0 * k * uk1 - k * ck1
    s_b = 2.0 * k * uk1 - 2.0 * k * ck1
    num = b * (1.0 - uk1)
    num_a = b * (k - 1) * u ** (k - 2)
    num_b = (1.0 - uk1) + num_a
    F = np.array([a / s - rho11, num / s - (0.5 - rho11)])
    J = np.array([
        [1.0 / s - a * s_a / s ** 2, -a * s_b / s ** 2],
        [num_a / s - num * s_a / s ** 2, num_b / s - num * s_b / s ** 2],
    ])
    return F, J, s


def _feasible(x) -> bool:
    a, b = x
    return a > 0.0 and b > 0.0 and 1.0 - a - 2.0 * b > 0.0


def _newton(k: int, rho11: float, x0: np.ndarray):
    x = np.array(x0, dtype=float)
    F, J, _ = _system(x, k, rho11)
    norm = float(np.max(np.abs(F)))
    for it in range(1, MAX_NEWTON_ITER + 1):
        if norm <= RESIDUAL_TOL:
            return x, norm, it - 1
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-12:
            cand = x + t * step
            if _feasible(cand):
                F_c, J_c, _ = _system(cand, k, rho11)
                norm_c = float(np.max(np.abs(F_c)))
                if norm_c < norm or norm_c <= RESIDUAL_TOL:
                    break
            t *= 0.5
        else:
            break
        x, F, J, norm = cand, F_c, J_c, norm_c
    return x, norm, MAX_NEWTON_ITER


def overlap_solve(k: int, rho11: float) -> OverlapPoint:
    """Solve for the pair distribution ``q`` matching the overlap ``rho``.

    Damped Newton from the product measure.  If that fails, the target is
    approached by continuation from ``rho11 = 1/4`` where the product
    measure is exact.
    """
    if k < 3:
        raise DomainError("overlap_solve needs k >= 3")
    rho = rho_from_rho11(rho11)
    q = solve_q(k)
    start = np.array([q * q, q * (1.0 - q)])
    x, res, iters = _newton(k, rho11, start)
    if res > RESIDUAL_TOL:
        x = start
        total = 0
        for target in np.linspace(0.25, rho11, 41)[1:]:
            x, res, it = _newton(k, float(target), x)
            total += it
        iters += total
    if not (res <= 1e-10 and _feasible(x)):
        raise NumericalError(
            f"overlap_solve failed at k={k}, rho11={rho11}: residual {res:.3e}, "
            f"point {x.tolist()}")
    a, b = x
    c = 1.0 - a - 2.0 * b
    qmat = np.array([a, b, b, c])
    s = 1.0 - 2.0 * (c + b) ** k + c ** k
    f_val = math.log(s) + k * kl_divergence(rho, qmat)
    return OverlapPoint(float(rho11), tuple(rho.tolist()), tuple(qmat.tolist()), float(s),
                        float(f_val), entropy(rho), float(res), int(iters))


def f_exponent(k: int, rho11: float) -> float:
    return overlap_solve(k, rho11).f_val


def g_exponent(k: int, d: float, rho11: float) -> float:
    rho = rho_from_rho11(rho11)
    return entropy(rho) + (2.0 * d / k) * math.log(1.0 - 2.0 ** (1 - k) + rho11 ** k)


class OverlapExponents(NamedTuple):
    f: float
    g: float
    H: float


def overlap_exponents(k: int, d: float, rho11: float) -> OverlapExponents:
    pt = overlap_solve(k, rho11)
    return OverlapExponents(pt.f_val, g_exponent(k, d, rho11), pt.entropy)


def _stationary_map(x: float, k: int, d: float) -> float:
    return x - math.exp(-2.0 * d * (1.0 + x) / ((2.0 ** k - 2.0) * (1.0 + x) ** k + 1.0))


def g_stationary_points(k: int, d: float, grid: int = 512) -> tuple[float, float]:
    """The two smallest fixed points of the stationarity map of ``g``.

    Sign changes are located on a log-spaced grid over
    ``(2^-3k, 1/2 - 2^-0.49k)`` and refined by bisection.
    """
    if k < 3:
        raise DomainError("g_stationary_points needs k >= 3")
    hi = 0.5 - 2.0 ** (-0.49 * k)
    lo = 2.0 ** (-3 * k)
    if not lo < hi:
        raise DomainError(f"empty search interval at k={k}")
    xs = np.geomspace(lo, hi, grid)
    vals = np.array([_stationary_map(x, k, d) for x in xs])
    roots = []
    for i in range(grid - 1):
        if vals[i] == 0.0:
            roots.append(float(xs[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(brentq(_stationary_map, xs[i], xs[i + 1], args=(k, d),
                                xtol=1e-15, rtol=1e-14))
        if len(roots) == 2:
            break
    if len(roots) < 2:
        raise NumericalError(
            f"found {len(roots)} bracketed root(s) of the stationarity map at k={k}, d={d}")
    return roots[0], roots[1]


def bar_nu(k: int, rho11: float, sigma: Sequence[int] | int, tau: Sequence[int] | int) -> float:
    """Pair pattern law ``prod_i q_{sigma_i, tau_i} / s`` on satisfying pairs."""
    pt = overlap_solve(k, rho11)
    return _bar_nu_from_point(pt, k, sigma, tau)


def _as_code(p, k: int) -> int:
    code = int(p) if isinstance(p, (int, np.integer)) else pattern_code(p)
    if not isinstance(p, (int, np.integer)) and len(p) != k:
        raise DomainError(f"pattern must have length k={k}")
    if not 0 < code < (1 << k):
        raise DomainError("pattern must be a satisfying (not all-false) pattern")
    return code


def _bar_nu_from_point(pt: OverlapPoint, k: int, sigma, tau) -> float:
    cs, ct = _as_code(sigma, k), _as_code(tau, k)
    val = 1.0
    for i in range(k):
        si, ti = (cs >> i) & 1, (ct >> i) & 1
        val *= pt.qmat[(1 - si) * 2 + (1 - ti)]
    return val / pt.s


def bar_nu_matrix(k: int, rho11: float) -> np.ndarray:
    """``bar_nu`` over all pattern codes, entry ``[sigma, tau]``; row/column 0 is zero."""
    pt = overlap_solve(k, rho11)
    size = 1 << k
    out = np.zeros((size, size))
    for cs in range(1, size):
        for ct in range(1, size):
            out[cs, ct] = _bar_nu_from_point(pt, k, cs, ct)
    return out
