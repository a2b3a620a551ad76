"""Special functions and the quantiles used by the calibrations.

Regularized incomplete gamma and beta are evaluated with the usual
series / continued-fraction split; quantiles are obtained by a
safeguarded Newton iteration that falls back to bisection whenever the
Newton step leaves the current bracket.
"""

from __future__ import annotations

import math
from statistics import NormalDist

from .errors import CalibrationError, DomainError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 20000

_STD_NORMAL = NormalDist()


def _check_prob(p: float) -> None:
    if not (0.0 < p < 1.0) or math.isnan(p):
        raise DomainError(f"probability must lie in (0, 1), got {p!r}")


def _check_dof(*dofs: float) -> None:
    for d in dofs:
        if not d >= 1:
            raise DomainError(f"degrees of freedom must be >= 1, got {d!r}")


def ln_gamma(x: float) -> float:
    """log Gamma(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


# -- incomplete gamma ------------------------------------------------------

def _gamma_series(a: float, x: float) -> float:
    # P(a, x) by its power series; converges fast for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a: float, x: float) -> float:
    # Q(a, x) by modified Lentz on the continued fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise DomainError("shape must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cfrac(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise DomainError("shape must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cfrac(a, x)


# -- incomplete beta -------------------------------------------------------

def _beta_cfrac(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def _beta_front(a: float, b: float, x: float) -> float:
    return math.exp(
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise DomainError("beta parameters must be positive")
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _beta_front(a, b, x) * _beta_cfrac(a, b, x) / a
    return 1.0 - _beta_front(b, a, 1.0 - x) * _beta_cfrac(b, a, 1.0 - x) / b


def betainc_upper(a: float, b: float, x: float) -> float:
    """1 - I_x(a, b), computed without cancellation in the upper tail."""
    if x <= 0:
        return 1.0
    if x >= 1:
        return 0.0
    if a <= 0 or b <= 0:
        raise DomainError("beta parameters must be positive")
    # branch on x itself: forming 1 - x loses tiny x entirely
    if x < (a + 1.0) / (a + b + 2.0):
        return 1.0 - _beta_front(a, b, x) * _beta_cfrac(a, b, x) / a
    return _beta_front(b, a, 1.0 - x) * _beta_cfrac(b, a, 1.0 - x) / b


# -- distribution functions ------------------------------------------------

def chi2_cdf(x: float, df: float) -> float:
    return gammainc_lower(0.5 * df, 0.5 * x)


def chi2_sf(x: float, df: float) -> float:
    return gammainc_upper(0.5 * df, 0.5 * x)


def _chi2_pdf(x: float, df: float) -> float:
    if x <= 0:
        return 0.0
    a = 0.5 * df
    return math.exp((a - 1.0) * math.log(x) - 0.5 * x - a * math.log(2.0) - math.lgamma(a))


def f_cdf(x: float, d1: float, d2: float) -> float:
    if x <= 0:
        return 0.0
    return betainc(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2))


def f_sf(x: float, d1: float, d2: float) -> float:
    if x <= 0:
        return 1.0
    # I_{d2/(d2+d1 x)}(d2/2, d1/2) is the upper tail, accurate for large x
    return betainc(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * x))


def _f_pdf(x: float, d1: float, d2: float) -> float:
    if x <= 0:
        return 0.0
    a, b = 0.5 * d1, 0.5 * d2
    log_pdf = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(d1 / d2) + (a - 1.0) * math.log(x)
        - (a + b) * math.log1p(d1 * x / d2)
    )
    return math.exp(log_pdf)


def _invert(cdf, sf, pdf, p: float, x0: float) -> float:
    """Solve cdf(x) = p on (0, inf) by Newton steps kept inside a bracket."""
    if p <= 0.5:
        def h(x):
            return cdf(x) - p
    else:
        q = 1.0 - p

        def h(x):
            return q - sf(x)

    lo, hi = 0.0, max(x0, 1e-8)
    while h(hi) < 0:
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            raise DomainError("quantile bracket expansion failed")
    x = min(max(x0, lo), hi)
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    for _ in range(400):
        fx = h(x)
        if fx == 0.0:
            return x
        if fx < 0:
            lo = x
        else:
            hi = x
        dens = pdf(x)
        step = fx / dens if dens > 0 else math.inf
        x_new = x - step
        if not (lo < x_new < hi) or not math.isfinite(x_new):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 4 * _EPS * max(1.0, abs(x_new)) or hi - lo <= 4 * _EPS * max(1.0, hi):
            return x_new
        x = x_new
    return x


def normal_quantile(p: float) -> float:
    """Standard normal quantile."""
    _check_prob(p)
    return _STD_NORMAL.inv_cdf(p)


def chi2_quantile(p: float, df: int) -> float:
    """Quantile of the chi-square distribution with ``df`` degrees of freedom."""
    _check_prob(p)
    _check_dof(df)
    # Wilson-Hilferty start
    z = normal_quantile(p)
    h = 2.0 / (9.0 * df)
    x0 = df * max(1.0 - h + z * math.sqrt(h), 0.1) ** 3
    return _invert(
        lambda x: chi2_cdf(x, df),
        lambda x: chi2_sf(x, df),
        lambda x: _chi2_pdf(x, df),
        p,
        x0,
    )


def f_quantile(p: float, d1: int, d2: int) -> float:
    """Quantile of Fisher's F(d1, d2) distribution."""
    _check_prob(p)
    _check_dof(d1, d2)
    x0 = chi2_quantile(p, d1) / d1
    return _invert(
        lambda x: f_cdf(x, d1, d2),
        lambda x: f_sf(x, d1, d2),
        lambda x: _f_pdf(x, d1, d2),
        p,
        x0,
    )


def fisher_critical(k: int, level: float, dim: int = 2) -> float:
    """Fisher-calibrated critical value for an EL statistic.

    Parameters
    ----------
    k : int
        Number of excesses entering the statistic.
    level : float
        Confidence level in (0, 1).
    dim : {1, 2}
        Number of estimating equations profiled into the statistic.

    Returns
    -------
    float
        ``2(k-1)/(k-2) * F_level(2, k-2)`` when ``dim == 2`` and
        ``F_level(1, k-1)`` when ``dim == 1``.
    """
    _check_prob(level)
    if dim not in (1, 2):
        raise DomainError("dim must be 1 or 2")
    if k < 5 or k <= dim + 2:
        raise CalibrationError(f"Fisher calibration needs k >= 5 and k > dim + 2, got k={k}")
    if dim == 2:
        return 2.0 * (k - 1) / (k - 2) * f_quantile(level, 2, k - 2)
    return f_quantile(level, 1, k - 1)


def critical_value(level: float, dim: int, calibration: str = "chi2", k: int | None = None) -> float:
    """Dispatch between the chi-square and Fisher calibrations."""
    if calibration == "chi2":
        return chi2_quantile(level, dim)
    if calibration == "fisher":
        if k is None:
            raise CalibrationError("Fisher calibration requires the sample size k")
        return fisher_critical(k, level, dim)
    raise DomainError(f"unknown calibration {calibration!r}")
