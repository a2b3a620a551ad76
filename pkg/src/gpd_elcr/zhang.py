"""Zhang's estimating equations for the GPD and the associated Wald statistic.

With ``b = -gamma/sigma`` the two equations

    mean(log(1 + gamma*Y/sigma)) = gamma
    mean((1 + gamma*Y/sigma) ** (r/gamma)) = 1/(1 - r)

collapse to a scalar root problem in ``b``; ``gamma`` then follows from the
first equation and ``sigma`` from ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, EstimationError
from .models import GpdParams

DEFAULT_R = -0.5
_MAX_DOUBLINGS = 60


def check_r(r: float) -> None:
    if not r < 0.5:
        raise DomainError(f"tuning parameter r must be < 1/2, got {r!r}")
    if r == 0:
        raise DomainError("r = 0 makes the moment equation degenerate")


@dataclass(frozen=True)
class ZhangFit:
    params: GpdParams
    b: float
    r: float
    residuals: tuple

    @property
    def gamma(self) -> float:
        return self.params.gamma

    @property
    def sigma(self) -> float:
        return self.params.sigma


def _as_excesses(excesses) -> np.ndarray:
    y = np.asarray(excesses, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise DomainError("excesses must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise DomainError("excesses must be finite and strictly positive")
    return y


def _residual(b: float, y: np.ndarray, r: float) -> float:
    logs = np.log1p(-b * y)
    gbar = logs.mean()
    return np.exp(logs * (r / gbar)).mean() - 1.0 / (1.0 - r)


def b_residual(b: float, excesses, r: float = DEFAULT_R) -> float:
    """Value of the scalar equation in ``b`` at a trial point.

    Parameters
    ----------
    b : float
        Trial value, nonzero and below ``1/max(excesses)``.
    excesses : array_like
        Positive excesses over the threshold.
    r : float
        Tuning parameter, ``r < 1/2``.
    """
    check_r(r)
    y = _as_excesses(excesses)
    if b == 0 or not b < 1.0 / y.max():
        raise DomainError(f"b must be nonzero and < 1/max(Y) = {1.0 / y.max():g}, got {b!r}")
    return float(_residual(b, y, r))


def solve_b(excesses, r: float = DEFAULT_R) -> float:
    """Root of :func:`b_residual` on the heavy-tail half line ``b < 0``."""
    check_r(r)
    y = _as_excesses(excesses)
    if y.size < 5:
        raise DomainError("need at least 5 excesses")
    if np.ptp(y) == 0:
        raise EstimationError("degenerate sample: all excesses equal")

    def f(b):
        return _residual(b, y, r)

    b0 = -1.0 / y.mean()
    f0 = f(b0)
    if f0 == 0:
        return b0
    lo = hi = b0
    if f0 > 0:
        # residual is negative as b -> -inf
        for _ in range(_MAX_DOUBLINGS):
            lo *= 2.0
            if f(lo) < 0:
                break
        else:
            raise EstimationError("no sign change found toward b -> -inf")
    else:
        # residual must turn positive before 0-; otherwise gamma <= 0
        for _ in range(_MAX_DOUBLINGS):
            hi *= 0.5
            if f(hi) > 0:
                break
        else:
            raise EstimationError("no sign change found toward b -> 0-: sample is not heavy-tailed")
    if f0 > 0:
        hi = lo * 0.5
    else:
        lo = hi * 2.0
    return float(brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))


def zhang_fit(excesses, r: float = DEFAULT_R) -> ZhangFit:
    """Zhang's estimator of ``(gamma, sigma)`` from the excesses."""
    y = _as_excesses(excesses)
    b = solve_b(y, r)
    logs = np.log1p(-b * y)
    gamma = float(logs.mean())
    if not gamma > 0:
        raise EstimationError("estimated gamma is not positive")
    sigma = -gamma / b
    z = np.log1p(gamma * y / sigma)
    res1 = float(z.mean() - gamma)
    res2 = float(np.exp(z * (r / gamma)).mean() - 1.0 / (1.0 - r))
    return ZhangFit(GpdParams(gamma, sigma), b, r, (res1, res2))


def sigma_matrix(gamma: float, r: float = DEFAULT_R) -> np.ndarray:
    """Asymptotic covariance of sqrt(k)(gamma_hat - gamma, sigma_hat/sigma - 1)."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    check_r(r)
    d = 1.0 - 2.0 * r
    s11 = (1.0 - r) * (1.0 + (2.0 * gamma**2 + 2.0 * gamma + r) / d)
    s12 = -1.0 - (r**2 + gamma**2 + gamma) / d
    s22 = 2.0 + ((r - gamma) ** 2 + 2.0 * gamma) / d
    return np.array([[s11, s12], [s12, s22]])


def standardized_error(estimate: GpdParams, hypothesized: GpdParams) -> np.ndarray:
    return np.array([estimate.gamma - hypothesized.gamma, estimate.sigma / hypothesized.sigma - 1.0])


def wald_stat(fit, hypothesized: GpdParams, k: int, cov) -> float:
    """k * v' cov^-1 v with v = (gamma_hat - gamma0, sigma_hat/sigma0 - 1).

    ``fit`` may be a :class:`ZhangFit`, an MLE fit or a bare
    :class:`GpdParams`.
    """
    est = getattr(fit, "params", fit)
    v = standardized_error(est, hypothesized)
    cov = np.asarray(cov, dtype=float)
    if np.linalg.cond(cov) > 1e14:
        raise np.linalg.LinAlgError("covariance matrix is singular")
    return float(k * v @ np.linalg.solve(cov, v))
