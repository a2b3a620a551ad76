"""Joint confidence regions for (gamma, sigma).

EL regions are sublevel sets of the EL log-ratio evaluated on a grid and
traced with marching squares. Wald regions are ellipses in the
standardized coordinates ``(gamma_hat - gamma, sigma_hat/sigma - 1)``
mapped back to ``(gamma, sigma)``.

Membership is always decided from the statistic itself, never from the
traced polygon.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .el_core import el_ratio_safe
from .errors import DomainError
from .statfun import chi2_quantile, critical_value
from .zhang import DEFAULT_R, ZhangFit, sigma_matrix, zhang_fit

METHODS = ("EL", "ZHANG_WALD", "ML_WALD")
_MAX_GRID_EXPANSIONS = 4


@dataclass(frozen=True)
class GridSpec:
    gamma_range: tuple
    sigma_range: tuple
    n_gamma: int = 96
    n_sigma: int = 96

    def __post_init__(self):
        for lo, hi in (self.gamma_range, self.sigma_range):
            if not (0 < lo < hi):
                raise DomainError("grid ranges must be positive with lo < hi")
        if self.n_gamma < 16 or self.n_sigma < 16:
            raise DomainError("grids need at least 16 points per axis")

    @property
    def gammas(self) -> np.ndarray:
        return np.linspace(*self.gamma_range, self.n_gamma)

    @property
    def sigmas(self) -> np.ndarray:
        return np.linspace(*self.sigma_range, self.n_sigma)


@dataclass
class ConfidenceRegion:
    method: str
    level: float
    critical_value: float
    center: tuple
    boundary: list
    grid: GridSpec | None = None
    values: np.ndarray | None = None
    clipped: bool = False
    k: int | None = None
    cov: np.ndarray | None = None
    statistic: Callable[[float, float], float] | None = field(default=None, repr=False, compare=False)


# -- marching squares ------------------------------------------------------

def _edge_point(key, xs, ys, vals, level, refine):
    kind, i, j = key
    if kind == "h":
        (ia, ja), (ib, jb) = (i, j), (i + 1, j)
    else:
        (ia, ja), (ib, jb) = (i, j), (i, j + 1)
    pa = np.array([xs[ia], ys[ja]])
    pb = np.array([xs[ib], ys[jb]])
    va, vb = vals[ia, ja], vals[ib, jb]
    if math.isfinite(va) and math.isfinite(vb):
        t = (level - va) / (vb - va)
        return pa + t * (pb - pa)
    if refine is None:
        # infinite end: the crossing hugs the finite vertex
        return pa if math.isfinite(va) else pb
    inside, outside = (pa, pb) if va <= level else (pb, pa)
    for _ in range(40):
        mid = 0.5 * (inside + outside)
        if refine(mid[0], mid[1]) <= level:
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def marching_squares(values, xs, ys, level: float, center_value=None, refine=None) -> list:
    """Trace the ``level`` contour of a grid field.

    Parameters
    ----------
    values : ndarray, shape (len(xs), len(ys))
        Field values; ``+inf`` marks points outside every sublevel set.
    xs, ys : ndarray
        Grid coordinates along each axis.
    level : float
        Contour level; vertices with ``value <= level`` are inside.
    center_value : callable, optional
        ``center_value(x, y)`` evaluated at a saddle cell's center to decide
        which diagonal is connected. Defaults to the mean of the corners.
    refine : callable, optional
        Field evaluator used to bisect edges with an infinite endpoint.

    Returns
    -------
    list of ndarray
        Polylines of shape ``(m, 2)``. Closed ones repeat their first vertex
        and run counterclockwise.
    """
    vals = np.asarray(values, dtype=float)
    nx, ny = vals.shape
    inside = vals <= level
    links: dict[tuple, list] = {}

    def link(e1, e2):
        links.setdefault(e1, []).append(e2)
        links.setdefault(e2, []).append(e1)

    for i in range(nx - 1):
        for j in range(ny - 1):
            corners = (inside[i, j], inside[i + 1, j], inside[i + 1, j + 1], inside[i, j + 1])
            n_in = sum(corners)
            if n_in in (0, 4):
                continue
            edges = (("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j))
            crossing = [m for m in range(4) if corners[m] != corners[(m + 1) % 4]]
            if len(crossing) == 2:
                link(edges[crossing[0]], edges[crossing[1]])
                continue
            # saddle: inside corners sit on one diagonal
            xc, yc = 0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])
            if center_value is not None:
                vc = center_value(xc, yc)
            else:
                quad = [vals[i, j], vals[i + 1, j], vals[i + 1, j + 1], vals[i, j + 1]]
                vc = float(np.mean(quad)) if all(map(math.isfinite, quad)) else math.inf
            center_in = vc <= level
            # cut off the corners not joined through the center
            cut = [m for m in range(4) if corners[m] != center_in]
            for m in cut:
                link(edges[(m - 1) % 4], edges[m])

    points = {e: _edge_point(e, xs, ys, vals, level, refine) for e in links}
    seen: set = set()
    polylines = []

    def walk(start):
        path = [start]
        seen.add(start)
        cur = start
        while True:
            nbrs = [e for e in links[cur] if e not in seen]
            if not nbrs:
                if len(path) > 2 and start in links[cur]:
                    path.append(start)
                break
            cur = nbrs[0]
            path.append(cur)
            seen.add(cur)
        return path

    for e in sorted(links):
        if len(links[e]) == 1 and e not in seen:
            polylines.append(walk(e))
    for e in sorted(links):
        if e not in seen:
            polylines.append(walk(e))

    out = []
    for path in polylines:
        pts = np.array([points[e] for e in path])
        if path[0] == path[-1] and polygon_area(pts) < 0:
            pts = pts[::-1]
        out.append(pts)
    return out


def polygon_area(pts) -> float:
    """Signed shoelace area of a closed polyline (positive if counterclockwise)."""
    p = np.asarray(pts, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]) + x[-1] * y[0] - x[0] * y[-1])


# -- EL regions ------------------------------------------------------------

def default_grid(fit: ZhangFit, k: int, r: float = DEFAULT_R, n: int = 96, width: float = 4.0) -> GridSpec:
    """MELE +/- ``width`` Wald standard deviations per axis, kept positive."""
    cov = sigma_matrix(fit.gamma, r)
    sd_g = math.sqrt(cov[0, 0] / k)
    sd_s = fit.sigma * math.sqrt(cov[1, 1] / k)
    g_lo = max(fit.gamma - width * sd_g, 0.02 * fit.gamma)
    s_lo = max(fit.sigma - width * sd_s, 0.02 * fit.sigma)
    return GridSpec((g_lo, fit.gamma + width * sd_g), (s_lo, fit.sigma + width * sd_s), n, n)


def _grid_rows(args):
    y, r, gammas, sigmas = args
    return [[el_ratio_safe(y, g, s, r) for s in sigmas] for g in gammas]


def evaluate_el_grid(excesses, r: float, grid: GridSpec, threads: int = 1) -> np.ndarray:
    """EL log-ratio at every grid vertex, shape ``(n_gamma, n_sigma)``."""
    y = np.asarray(excesses, dtype=float)
    gammas, sigmas = grid.gammas, grid.sigmas
    if threads <= 1:
        return np.array(_grid_rows((y, r, gammas, sigmas)))
    chunks = np.array_split(gammas, threads)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        rows = pool.map(_grid_rows, [(y, r, c, sigmas) for c in chunks if c.size])
    return np.array([row for part in rows for row in part])


def _expand(grid: GridSpec, values: np.ndarray, crit: float) -> GridSpec | None:
    (g0, g1), (s0, s1) = grid.gamma_range, grid.sigma_range
    dg, ds = g1 - g0, s1 - s0
    grow = False
    if np.any(values[0, :] <= crit):
        g0, grow = g0 * 0.5, True
    if np.any(values[-1, :] <= crit):
        g1, grow = g1 + 0.5 * dg, True
    if np.any(values[:, 0] <= crit):
        s0, grow = s0 * 0.5, True
    if np.any(values[:, -1] <= crit):
        s1, grow = s1 + 0.5 * ds, True
    if not grow:
        return None
    return GridSpec((g0, g1), (s0, s1), grid.n_gamma, grid.n_sigma)


def el_region(excesses, r: float = DEFAULT_R, level: float = 0.95, grid: GridSpec | None = None,
              calibration: str = "fisher", threads: int = 1, fit: ZhangFit | None = None) -> ConfidenceRegion:
    """EL confidence region ``{(gamma, sigma): l(gamma, sigma) <= c}``.

    The grid is widened (up to four times) while the sublevel set touches
    its edge, and always contains the MELE.
    """
    y = np.asarray(excesses, dtype=float)
    k = y.size
    fit = fit or zhang_fit(y, r)
    crit = critical_value(level, 2, calibration, k=k)
    if grid is None:
        grid = default_grid(fit, k, r)
    else:
        (g0, g1), (s0, s1) = grid.gamma_range, grid.sigma_range
        if not (g0 < fit.gamma < g1 and s0 < fit.sigma < s1):
            g0, g1 = min(g0, 0.5 * fit.gamma), max(g1, 1.5 * fit.gamma)
            s0, s1 = min(s0, 0.5 * fit.sigma), max(s1, 1.5 * fit.sigma)
            grid = GridSpec((g0, g1), (s0, s1), grid.n_gamma, grid.n_sigma)
    values = evaluate_el_grid(y, r, grid, threads)
    for _ in range(_MAX_GRID_EXPANSIONS):
        bigger = _expand(grid, values, crit)
        if bigger is None:
            break
        grid = bigger
        values = evaluate_el_grid(y, r, grid, threads)

    def stat(g, s):
        if not (g > 0 and s > 0):
            return math.inf
        return el_ratio_safe(y, g, s, r)

    boundary = marching_squares(values, grid.gammas, grid.sigmas, crit, center_value=stat, refine=stat)
    return ConfidenceRegion("EL", level, crit, (fit.gamma, fit.sigma), boundary, grid, values,
                            clipped=False, k=k, statistic=stat)


# -- Wald regions ----------------------------------------------------------

def wald_region(fit, cov, k: int, level: float = 0.95, n_points: int = 256,
                method: str = "ZHANG_WALD") -> ConfidenceRegion:
    """Wald ellipse ``k v' cov^-1 v <= chi2_level(2)`` mapped to (gamma, sigma).

    With ``v = (gamma_hat - gamma, sigma_hat/sigma - 1)`` the boundary point
    for ``v`` is ``(gamma_hat - v1, sigma_hat / (1 + v2))``. When the
    ellipse reaches ``v2 <= -1`` the set contains non-positive (or
    unbounded) sigma: ``clipped`` is set and those vertices are dropped
    from the boundary.
    """
    est = getattr(fit, "params", fit)
    cov = np.asarray(cov, dtype=float)
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() <= 0:
        raise np.linalg.LinAlgError("covariance must be positive definite")
    crit = chi2_quantile(level, 2)
    t = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    circle = np.stack([np.cos(t), np.sin(t)])
    v = math.sqrt(crit / k) * (evecs * np.sqrt(evals)) @ circle
    denom = 1.0 + v[1]
    clipped = bool(denom.min() <= 0) or math.sqrt(crit * cov[1, 1] / k) >= 1.0
    keep = denom > 0
    pts = np.stack([est.gamma - v[0], est.sigma / np.where(keep, denom, 1.0)], axis=1)
    boundary = []
    if keep.all():
        pts = np.vstack([pts, pts[:1]])
        if polygon_area(pts) < 0:
            pts = pts[::-1]
        boundary.append(pts)
    else:
        # rotate so the kept arc is contiguous
        start = int(np.argmax(~keep))
        order = np.roll(np.arange(n_points), -start)
        arc = [i for i in order if keep[i]]
        boundary.append(pts[arc])

    def stat(g, s):
        if s == 0:
            return math.inf
        w = np.array([est.gamma - g, est.sigma / s - 1.0])
        return float(k * w @ np.linalg.solve(cov, w))

    return ConfidenceRegion(method, level, crit, (est.gamma, est.sigma), boundary, None, None,
                            clipped=clipped, k=k, cov=cov, statistic=stat)


def zhang_wald_region(fit: ZhangFit, k: int, level: float = 0.95, n_points: int = 256) -> ConfidenceRegion:
    return wald_region(fit, sigma_matrix(fit.gamma, fit.r), k, level, n_points, "ZHANG_WALD")


def ml_wald_region(fit, k: int, level: float = 0.95, n_points: int = 256) -> ConfidenceRegion:
    from .mle import mle_cov

    return wald_region(fit, mle_cov(fit.params.gamma), k, level, n_points, "ML_WALD")


def wald_ellipse_area(region: ConfidenceRegion) -> float:
    """Area of the Wald ellipse in the standardized coordinates."""
    return math.pi * region.critical_value / region.k * math.sqrt(np.linalg.det(region.cov))


def region_contains(region: ConfidenceRegion, point) -> bool:
    """Membership by direct evaluation of the region's statistic."""
    g, s = point
    if region.method == "EL" and not (g > 0 and s > 0):
        return False
    return bool(region.statistic(g, s) <= region.critical_value)


# -- output ----------------------------------------------------------------

def write_region_csv(region: ConfidenceRegion, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["method", "level", "critical_value"])
    w.writerow([region.method, repr(region.level), repr(region.critical_value)])
    w.writerow(["polyline_id", "vertex_id", "gamma", "sigma"])
    for pid, line in enumerate(region.boundary):
        for vid, (g, s) in enumerate(line):
            w.writerow([pid, vid, repr(float(g)), repr(float(s))])


def write_grid_csv(region: ConfidenceRegion, fh) -> None:
    if region.grid is None:
        raise DomainError("only EL regions carry a grid")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["gamma", "sigma", "stat"])
    for i, g in enumerate(region.grid.gammas):
        for j, s in enumerate(region.grid.sigmas):
            w.writerow([repr(float(g)), repr(float(s)), repr(float(region.values[i, j]))])
