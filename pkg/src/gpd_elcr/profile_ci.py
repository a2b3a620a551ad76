"""Confidence intervals for the tail index.

Three constructions are provided:

* ELW: profile empirical likelihood over the scale, ``l(gamma, sigma_hat_gamma)``,
  inverted against a chi-square(1) or Fisher critical value;
* ELP: univariate empirical likelihood for the mean of the log-spacings
  above the threshold (the Hill estimator is its maximizer), calibrated by
  the Monte-Carlo null distribution under exponential log-spacings;
* Zhang: the normal approximation for Zhang's estimator of gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .el_core import el_ratio_safe, solve_lambda
from .errors import DomainError, ProfileFailure
from .statfun import critical_value, normal_quantile
from .zhang import DEFAULT_R, ZhangFit, check_r, sigma_matrix, zhang_fit

# log-scale half-width of the profile search: 2**8 either side
_PROFILE_SPAN = 8.0 * math.log(2.0)
_CAP = 1e12
STAT_TOL = 1e-6


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    method: str
    critical_value: float
    converged: bool
    estimate: float
    open_lo: bool = False
    open_hi: bool = False

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, gamma: float) -> bool:
        return self.lo <= gamma <= self.hi


class ProfilePoint(NamedTuple):
    sigma: float
    l_profile: float
    interior: bool


def _capped(v: float) -> float:
    return _CAP if not math.isfinite(v) or v > _CAP else v


def profile_sigma(excesses, gamma: float, r: float = DEFAULT_R, sigma_start: float | None = None,
                  fit: ZhangFit | None = None, xatol: float = 1e-10) -> ProfilePoint:
    """Minimize ``sigma -> l(gamma, sigma)`` over log-sigma.

    The search starts at ``sigma_start`` (Zhang's scale estimate by default),
    walks downhill with doubling steps to bracket the minimum, and refines
    with bounded Brent iterations. Infeasible scales count as ``+inf``.

    Raises
    ------
    ProfileFailure
        When no feasible scale exists within a factor ``2**8`` of the start.
    """
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    check_r(r)
    y = np.asarray(excesses, dtype=float)
    if sigma_start is None:
        sigma_start = (fit or zhang_fit(y, r)).sigma
    s_mid = math.log(sigma_start)
    lo_lim, hi_lim = s_mid - _PROFILE_SPAN, s_mid + _PROFILE_SPAN
    cache: dict[float, float] = {}

    def f(s: float) -> float:
        if s not in cache:
            cache[s] = el_ratio_safe(y, gamma, math.exp(s), r)
        return cache[s]

    s0 = s_mid
    if not math.isfinite(f(s0)):
        # scan outward for any feasible scale
        for m in range(1, 33):
            off = m * _PROFILE_SPAN / 32
            cands = [c for c in (s_mid - off, s_mid + off) if math.isfinite(f(c))]
            if cands:
                s0 = min(cands, key=f)
                break
        else:
            raise ProfileFailure(f"no feasible scale for gamma={gamma:g}")

    h = 0.05
    up, down = f(min(s0 + h, hi_lim)), f(max(s0 - h, lo_lim))
    direction = 1.0 if up < down else -1.0
    a, b = s0, s0
    fb = f(s0)
    c = b + direction * h
    while True:
        c = min(max(c, lo_lim), hi_lim)
        fc = f(c)
        if fc > fb:
            break
        if c in (lo_lim, hi_lim):
            break
        a, b, fb = b, c, fc
        h *= 2.0
        c = b + direction * h
    if a == b:
        a = max(min(b - direction * 0.05, hi_lim), lo_lim)
    lo, hi = sorted((a, c))
    res = minimize_scalar(lambda s: _capped(f(s)), bounds=(lo, hi), method="bounded",
                          options={"xatol": xatol, "maxiter": 500})
    s_best, l_best = float(res.x), float(f(float(res.x)))
    if fb < l_best:
        s_best, l_best = b, fb
    interior = f(lo) > l_best and f(hi) > l_best
    return ProfilePoint(math.exp(s_best), l_best, interior)


class _Profile:
    """Profile statistic along gamma with warm starts from nearby evaluations."""

    def __init__(self, y, r, fit):
        self.y, self.r, self.fit = y, r, fit
        self.points: dict[float, ProfilePoint] = {fit.gamma: ProfilePoint(fit.sigma, 0.0, True)}

    def __call__(self, gamma: float) -> float:
        if gamma <= 0:
            return math.inf
        if gamma not in self.points:
            near = min(self.points, key=lambda g: abs(g - gamma))
            try:
                self.points[gamma] = profile_sigma(self.y, gamma, self.r,
                                                   sigma_start=self.points[near].sigma)
            except ProfileFailure:
                return math.inf
        return self.points[gamma].l_profile


def _invert_statistic(stat, center: float, scale: float, crit: float, lower_bound: float = 0.0,
                      upper_bound: float = math.inf, max_expand: int = 40):
    """Endpoints of ``{x : stat(x) <= crit}`` around ``center``.

    Each side is bracketed by doubling offsets from ``center`` starting at
    ``scale``, then refined by Brent's method on ``stat - crit``.
    """
    def h(x):
        return _capped(stat(x)) - crit

    ends = []
    flags = []
    for sign in (-1.0, 1.0):
        inner, outer = center, None
        step = scale
        for j in range(max_expand):
            x = center + sign * step
            if sign < 0 and x <= lower_bound:
                # approach the lower bound geometrically
                x = lower_bound + (inner - lower_bound) * 0.5
            if sign > 0 and x >= upper_bound:
                x = upper_bound - (upper_bound - inner) * 0.5
            if h(x) > 0:
                outer = x
                break
            inner = x
            step *= 2.0
        if outer is None:
            ends.append(inner)
            flags.append(True)
            continue
        a, b = sorted((inner, outer))
        root = brentq(h, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
        ends.append(root)
        flags.append(False)
    return ends[0], ends[1], flags[0], flags[1]


def elw_ci(excesses, r: float = DEFAULT_R, level: float = 0.95, calibration: str = "chi2",
           fit: ZhangFit | None = None) -> ConfidenceInterval:
    """Profile empirical likelihood interval for gamma.

    Parameters
    ----------
    excesses : array_like
        Positive excesses over the threshold.
    r : float
        Zhang tuning parameter.
    level : float
        Confidence level.
    calibration : {"chi2", "fisher"}
        Chi-square(1) quantile or ``F_level(1, k-1)``.
    """
    y = np.asarray(excesses, dtype=float)
    fit = fit or zhang_fit(y, r)
    crit = critical_value(level, 1, calibration, k=y.size)
    prof = _Profile(y, r, fit)
    scale = math.sqrt(sigma_matrix(fit.gamma, r)[0, 0] / y.size)
    lo, hi, open_lo, open_hi = _invert_statistic(prof, fit.gamma, scale, crit)
    converged = not (open_lo or open_hi)
    if converged:
        converged = all(abs(prof(x) - crit) <= STAT_TOL for x in (lo, hi))
    return ConfidenceInterval(lo, hi, level, "ELW", crit, converged, fit.gamma, open_lo, open_hi)


def elw_statistic(excesses, gamma: float, r: float = DEFAULT_R, fit: ZhangFit | None = None) -> float:
    """Profile statistic ``l(gamma, sigma_hat_gamma)``; ``inf`` when the profile fails."""
    y = np.asarray(excesses, dtype=float)
    fit = fit or zhang_fit(y, r)
    try:
        return profile_sigma(y, gamma, r, fit=fit).l_profile
    except ProfileFailure:
        return math.inf


def hill_estimator(data, k: int) -> float:
    """Hill estimator from the ``k`` largest values of ``data``."""
    return float(_log_spacings(data, k).mean())


def _log_spacings(data, k: int) -> np.ndarray:
    x = np.sort(np.asarray(data, dtype=float))
    n = x.size
    if not (1 <= k < n):
        raise DomainError(f"need 1 <= k < n, got k={k}, n={n}")
    u = x[n - k - 1]
    if not u > 0:
        raise DomainError("Hill estimator needs a positive threshold")
    return np.log(x[n - k:] / u)


def _mean_el_ratio(z: np.ndarray, mu: float) -> float:
    return solve_lambda(z - mu).log_ratio


def elp_statistic(data, k: int, gamma: float) -> float:
    """Univariate EL statistic for the mean of the log-spacings at ``gamma``."""
    return _mean_el_ratio(_log_spacings(data, k), gamma)


def exponential_calibration(k: int, level: float, reps: int = 10_000, seed: int = 0) -> float:
    """Monte-Carlo ``level``-quantile of the mean EL statistic under Exp(1) samples of size ``k``."""
    return _exp_calibration_cached(int(k), float(level), int(reps), int(seed))


@lru_cache(maxsize=64)
def _exp_calibration_cached(k: int, level: float, reps: int, seed: int) -> float:
    if k < 2 or reps < 1:
        raise DomainError("exponential calibration needs k >= 2 and reps >= 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, k])))
    stats = np.empty(reps)
    for i in range(reps):
        stats[i] = _mean_el_ratio(rng.standard_exponential(k), 1.0)
    return float(np.quantile(stats, level))


def elp_ci(data, k: int, level: float = 0.95, calib_reps: int = 10_000, seed: int = 0,
           critical: float | None = None) -> ConfidenceInterval:
    """Hill-based empirical likelihood interval with exponential calibration.

    ``critical`` overrides the Monte-Carlo critical value (useful when many
    intervals share the same ``k``).
    """
    if k < 10:
        raise DomainError("ELP needs k >= 10")
    z = _log_spacings(data, k)
    hill = float(z.mean())
    crit = critical if critical is not None else exponential_calibration(k, level, calib_reps, seed)

    def stat(mu):
        return _mean_el_ratio(z, mu)

    zmin, zmax = float(z.min()), float(z.max())
    lo, hi, open_lo, open_hi = _invert_statistic(
        stat, hill, hill / math.sqrt(k), crit, lower_bound=zmin, upper_bound=zmax)
    converged = not (open_lo or open_hi) and all(abs(stat(x) - crit) <= STAT_TOL for x in (lo, hi))
    return ConfidenceInterval(lo, hi, level, "ELP", crit, converged, hill, open_lo, open_hi)


def zhang_wald_ci(excesses, r: float = DEFAULT_R, level: float = 0.95,
                  fit: ZhangFit | None = None) -> ConfidenceInterval:
    """Normal-approximation interval around Zhang's gamma; not truncated at 0."""
    y = np.asarray(excesses, dtype=float)
    fit = fit or zhang_fit(y, r)
    z = normal_quantile(0.5 * (1.0 + level))
    half = z * math.sqrt(sigma_matrix(fit.gamma, r)[0, 0] / y.size)
    return ConfidenceInterval(fit.gamma - half, fit.gamma + half, level, "ZHANG_WALD", z, True, fit.gamma)


__all__ = [
    "ConfidenceInterval",
    "ProfilePoint",
    "elp_ci",
    "elp_statistic",
    "elw_ci",
    "elw_statistic",
    "exponential_calibration",
    "hill_estimator",
    "profile_sigma",
    "zhang_wald_ci",
]
