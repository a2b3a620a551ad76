"""Empirical likelihood for Zhang's estimating function.

For parameters ``(gamma, sigma)`` the estimating function is

    g(y) = (log(1 + gamma*y/sigma) - gamma,
            (1 + gamma*y/sigma) ** (r/gamma) - 1/(1 - r))

and the EL log-ratio is ``2 * sum(log(1 + lam . g_i))`` where ``lam`` solves
``sum(g_i / (1 + lam . g_i)) = 0``. The multiplier is found by maximizing
the concave dual ``sum(log(1 + lam . g_i))`` with damped Newton steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ElConvergenceError
from .zhang import check_r

MAX_NEWTON = 50
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class ElSolution:
    lam: np.ndarray
    log_ratio: float
    weights: np.ndarray | None
    converged: bool
    residual_norm: float
    iterations: int = 0
    feasible: bool = True


@dataclass(frozen=True)
class MomentOracles:
    A: np.ndarray
    B: np.ndarray


def g_vec(y, gamma: float, sigma: float, r: float) -> np.ndarray:
    """Estimating function evaluated at each excess; shape ``(k, 2)``.

    A scalar ``y`` gives a 2-vector.
    """
    if not (gamma > 0 and sigma > 0):
        raise DomainError("g requires gamma > 0 and sigma > 0")
    y = np.asarray(y, dtype=float)
    z = np.log1p(gamma * y / sigma)
    return np.stack([z - gamma, np.exp(z * (r / gamma)) - 1.0 / (1.0 - r)], axis=-1)


def _zero_in_hull(gs: np.ndarray) -> bool:
    """Whether the origin lies strictly inside the convex hull of the rows."""
    if gs.shape[1] == 1:
        col = gs[:, 0]
        return bool(col.min() < 0 < col.max())
    if gs.shape[1] != 2:
        raise DomainError("only d = 1 or d = 2 estimating equations are supported")
    nonzero = np.any(gs != 0, axis=1)
    pts = gs[nonzero]
    if pts.shape[0] < 3:
        return False
    ang = np.sort(np.arctan2(pts[:, 1], pts[:, 0]))
    gaps = np.diff(ang)
    wrap = ang[0] + 2 * np.pi - ang[-1]
    # a gap of pi or more means a closed half-plane holds every point
    return bool(max(gaps.max(initial=0.0), wrap) < np.pi - 1e-12)


def solve_lambda(gs, max_iter: int = MAX_NEWTON, tol: float = RESIDUAL_TOL) -> ElSolution:
    """Lagrange multiplier of the EL problem for the rows of ``gs``.

    Parameters
    ----------
    gs : array_like, shape (k,) or (k, d)
        Estimating-function values, one row per observation.
    max_iter : int
        Newton iteration budget.
    tol : float
        Target for ``|mean(g_i / (1 + lam . g_i))|``.

    Returns
    -------
    ElSolution
        With ``feasible=False`` and an infinite log-ratio when the origin is
        not interior to the convex hull of the ``g_i``.

    Raises
    ------
    ElConvergenceError
        If the budget is exhausted; the partial solution is attached.
    """
    g = np.asarray(gs, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    k, d = g.shape
    if k < d + 1:
        raise DomainError("need at least d + 1 observations")
    if not np.all(np.isfinite(g)) or not _zero_in_hull(g):
        return ElSolution(np.full(d, np.nan), math.inf, None, False, math.nan, 0, False)

    floor = 1.0 / k
    lam = np.zeros(d)
    arg = np.ones(k)
    dual = 0.0
    it = 0
    resid = math.inf
    for it in range(max_iter + 1):
        inv = 1.0 / arg
        score = g.T @ inv
        resid = float(np.linalg.norm(score) / k)
        # sum(p_i) - 1 = -lam . score / k, so both must be small
        drift = abs(float(lam @ score)) / k
        if resid <= tol and drift <= tol:
            break
        if it == max_iter:
            break
        gw = g * inv[:, None]
        info = gw.T @ gw
        step = np.linalg.solve(info, score)
        t = 1.0
        while True:
            cand = lam + t * step
            cand_arg = 1.0 + g @ cand
            if cand_arg.min() >= floor:
                cand_dual = float(np.log(cand_arg).sum())
                # rounding slack: near the optimum the dual gain is below ulp
                if cand_dual >= dual - 1e-13 * max(1.0, abs(dual)):
                    break
            t *= 0.5
            if t < 1e-14:
                break
        if t < 1e-14:
            break
        lam, arg, dual = cand, cand_arg, cand_dual

    sol = ElSolution(
        lam=lam,
        log_ratio=2.0 * dual,
        weights=1.0 / (k * arg),
        converged=resid <= tol and drift <= tol,
        residual_norm=resid,
        iterations=it,
    )
    if not sol.converged:
        raise ElConvergenceError(
            f"Lagrange multiplier Newton stalled after {it} iterations (residual {resid:.3g})",
            sol,
        )
    return sol


def el_solution(excesses, gamma: float, sigma: float, r: float, max_iter: int = MAX_NEWTON) -> ElSolution:
    check_r(r)
    return solve_lambda(g_vec(excesses, gamma, sigma, r), max_iter=max_iter)


def el_ratio(excesses, gamma: float, sigma: float, r: float, max_iter: int = MAX_NEWTON) -> float:
    """EL log-ratio l(gamma, sigma); ``inf`` at infeasible points."""
    return el_solution(excesses, gamma, sigma, r, max_iter).log_ratio


def el_ratio_safe(excesses, gamma: float, sigma: float, r: float, max_iter: int = 200) -> float:
    """Like :func:`el_ratio` but a stalled solve returns its lower bound.

    Used when only the comparison with a critical value matters far from the
    estimate; a stalled dual is already large.
    """
    try:
        return el_ratio(excesses, gamma, sigma, r, max_iter)
    except ElConvergenceError as exc:
        return exc.solution.log_ratio


def moment_oracles(gamma: float, r: float) -> MomentOracles:
    """Closed-form mean derivative ``A`` and second moment ``B`` of g under GPD(gamma, 1)."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    check_r(r)
    b12 = gamma * r / (1.0 - r) ** 2
    B = np.array([[gamma**2, b12], [b12, r**2 / ((1.0 - 2.0 * r) * (1.0 - r) ** 2)]])
    A = np.array([-gamma / (gamma + 1.0), -r / ((1.0 - r + gamma) * (1.0 - r))])
    return MomentOracles(A=A, B=B)
