"""GPD maximum likelihood and the ML Wald covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EstimationError, FitFailure
from .models import GpdParams
from .zhang import zhang_fit


MAX_ITER = 200
GRAD_TOL = 1e-8
GAMMA_FLOOR = 1e-6


@dataclass(frozen=True)
class MleFit:
    params: GpdParams
    loglik: float
    converged: bool
    iterations: int


def _loglik(gamma: float, sigma: float, y: np.ndarray) -> float:
    w = 1.0 + gamma * y / sigma
    if sigma <= 0 or np.any(w <= 0):
        return -np.inf
    return float(-y.size * np.log(sigma) - (1.0 / gamma + 1.0) * np.log(w).sum())


def gpd_loglik(params: GpdParams, excesses) -> float:
    """Log-likelihood of a GPD(gamma, sigma) sample of excesses."""
    y = np.asarray(excesses, dtype=float)
    if np.any(1.0 + params.gamma * y / params.sigma <= 0):
        raise DomainError("excesses fall outside the GPD support")
    return _loglik(params.gamma, params.sigma, y)


def _derivatives(gamma: float, s: float, y: np.ndarray):
    # gradient and Hessian in (gamma, log sigma)
    z = y * np.exp(-s)
    w = 1.0 + gamma * z
    lw = np.log(w)
    q = z / w
    k = y.size
    g1 = np.sum(lw) / gamma**2 - (1.0 / gamma + 1.0) * np.sum(q)
    g2 = -k + (1.0 + gamma) * np.sum(q)
    h11 = -2.0 * np.sum(lw) / gamma**3 + 2.0 * np.sum(q) / gamma**2 + (1.0 / gamma + 1.0) * np.sum(q * q)
    h12 = np.sum(q) - (1.0 + gamma) * np.sum(q * q)
    h22 = -(1.0 + gamma) * np.sum(q / w)
    return np.array([g1, g2]), np.array([[h11, h12], [h12, h22]])


def _pwm_start(y: np.ndarray):
    ys = np.sort(y)
    k = ys.size
    a0 = ys.mean()
    a1 = np.mean(ys * (1.0 - (np.arange(1, k + 1) - 0.35) / k))
    shape = a0 / (a0 - 2.0 * a1) - 2.0
    scale = 2.0 * a0 * a1 / (a0 - 2.0 * a1)
    gamma = float(np.clip(-shape, 0.05, 0.9))
    sigma = float(scale) if scale > 0 else float(a0)
    return gamma, sigma


def mle_fit(excesses, start: GpdParams | None = None) -> MleFit:
    """Maximize the GPD likelihood by safeguarded Newton on (gamma, log sigma).

    The iteration starts from Zhang's estimate (probability-weighted
    moments if that fails). Steps are halved until the iterate stays in the
    support with ``gamma > 0`` and the likelihood does not decrease; a non-negative-definite
    Hessian is shifted toward steepest ascent.

    Raises
    ------
    FitFailure
        If the gradient norm has not dropped below ``GRAD_TOL`` after
        ``MAX_ITER`` iterations; this includes samples whose likelihood
        increases toward the ``gamma <= 0`` boundary.
    """
    y = np.asarray(excesses, dtype=float)
    if y.size < 5:
        raise DomainError("need at least 5 excesses")
    if start is None:
        try:
            zf = zhang_fit(y)
            gamma, sigma = zf.gamma, zf.sigma
        except EstimationError:
            gamma, sigma = _pwm_start(y)
    else:
        gamma, sigma = start.gamma, start.sigma
    theta = np.array([gamma, np.log(sigma)])
    cur = _loglik(theta[0], np.exp(theta[1]), y)
    if not np.isfinite(cur):
        raise FitFailure("starting point outside the GPD support")

    for it in range(1, MAX_ITER + 1):
        grad, hess = _derivatives(theta[0], theta[1], y)
        if np.linalg.norm(grad) <= GRAD_TOL:
            return _finish(theta, cur, True, it - 1)
        shift = 0.0
        eig_max = np.linalg.eigvalsh(hess).max()
        if eig_max >= 0:
            shift = eig_max + 1e-6 * (1.0 + abs(np.trace(hess)))
        step = np.linalg.solve(hess - shift * np.eye(2), -grad)
        t = 1.0
        while t > 1e-12:
            cand = theta + t * step
            val = _loglik(cand[0], np.exp(cand[1]), y) if cand[0] > 0 else -np.inf
            if val >= cur - 1e-12 * abs(cur):
                break
            t *= 0.5
        else:
            break
        theta, cur = cand, val
        if theta[0] < GAMMA_FLOOR:
            raise FitFailure("likelihood increases toward the gamma <= 0 boundary")
    grad, _ = _derivatives(theta[0], theta[1], y)
    if np.linalg.norm(grad) <= GRAD_TOL:
        return _finish(theta, cur, True, MAX_ITER)
    raise FitFailure(
        f"GPD maximum likelihood did not converge (gamma={theta[0]:.4g}, "
        f"|grad|={np.linalg.norm(grad):.3g})"
    )


def _finish(theta, loglik, converged, iterations) -> MleFit:
    if not theta[0] > 0:
        raise FitFailure("maximum likelihood estimate of gamma is not positive")
    return MleFit(GpdParams(float(theta[0]), float(np.exp(theta[1]))), float(loglik), converged, iterations)


def mle_cov(gamma: float) -> np.ndarray:
    """Asymptotic covariance of sqrt(k)(gamma_hat - gamma, sigma_hat/sigma - 1)."""
    if not gamma > -0.5:
        raise DomainError("ML asymptotics require gamma > -1/2")
    return (1.0 + gamma) * np.array([[1.0 + gamma, -1.0], [-1.0, 2.0]])
