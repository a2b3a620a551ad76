"""Monte-Carlo coverage of the region and interval methods.

Every replication draws its sample from its own Philox stream keyed by
``(seed, replication)``, so results do not depend on how replications are
distributed over worker processes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .el_core import el_ratio_safe
from .errors import DomainError, EstimationError, FitFailure, ProfileFailure
from .mle import mle_cov, mle_fit
from .models import GpdParams, ModelSpec, extract_excesses, sample
from .profile_ci import elp_statistic, exponential_calibration, profile_sigma
from .statfun import chi2_quantile, critical_value, normal_quantile
from .zhang import DEFAULT_R, sigma_matrix, wald_stat, zhang_fit

REGION_METHODS = ("el", "zhang", "ml")
CI_METHODS = ("elw", "elp", "zhang_ci")
DEFAULT_CALIBRATION = {"el": "fisher", "zhang": "chi2", "ml": "chi2",
                       "elw": "chi2", "elp": "exp", "zhang_ci": "normal"}
CSV_HEADER = ["model", "n", "k", "method", "level", "calibration", "reps", "valid", "failures", "coverage"]


@dataclass(frozen=True)
class TrueScale:
    model: ModelSpec
    u: float
    sigma0: float


@dataclass(frozen=True)
class CoverageRecord:
    model: ModelSpec
    n: int
    k: int
    method: str
    calibration: str
    level: float
    hits: int
    valid_reps: int
    failures: int

    @property
    def coverage(self) -> float:
        return self.hits / self.valid_reps if self.valid_reps else math.nan

    @property
    def reps(self) -> int:
        return self.valid_reps + self.failures


def true_scale(model: ModelSpec, u: float) -> TrueScale:
    """GPD scale of the excesses over ``u``: ``t * U'(t)`` with ``t = 1/F_bar(u)``."""
    if model.family == "gpd":
        if u < 0:
            raise DomainError("threshold below the GPD support")
        g, s = model.params
        sigma0 = s + g * u
    elif not u > 0:
        raise DomainError("threshold must be positive")
    elif model.family == "frechet":
        (g,) = model.params
        ell = u ** (-1.0 / g)
        sigma0 = g * u ** ((g + 1.0) / g) * (-math.expm1(-ell)) / math.exp(-ell)
    else:
        lam, tau = model.params
        sigma0 = (lam / tau) * (1.0 + u**tau) * u ** (1.0 - tau)
    return TrueScale(model, float(u), float(sigma0))


def parse_method(token: str) -> tuple[str, str]:
    """``"el"`` or ``"el:chi2"`` -> ``(method, calibration)``."""
    name, _, calib = token.strip().lower().partition(":")
    if name not in REGION_METHODS + CI_METHODS:
        raise DomainError(f"unknown method {name!r}")
    calib = calib or DEFAULT_CALIBRATION[name]
    allowed = {"el": ("chi2", "fisher"), "elw": ("chi2", "fisher")}.get(name, (DEFAULT_CALIBRATION[name],))
    if calib not in allowed:
        raise DomainError(f"calibration {calib!r} not available for {name}")
    return name, calib


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, rep])))


@dataclass(frozen=True)
class _Config:
    model: ModelSpec
    n: int
    k_values: tuple
    methods: tuple
    level: float
    r: float
    seed: int
    criticals: dict


def _covered(cfg: _Config, method: str, calib: str, y: np.ndarray, x: np.ndarray, k: int,
             gamma0: float, sigma0: float, fits: dict):
    """1 (hit), 0 (miss) or None (method failed on this sample)."""
    crit = cfg.criticals[(method, calib, k)]
    if method == "el":
        stat = el_ratio_safe(y, gamma0, sigma0, cfg.r)
        return int(stat <= crit)
    if method == "elp":
        return int(elp_statistic(x, k, gamma0) <= crit)

    if method in ("zhang", "zhang_ci", "elw"):
        if "zhang" not in fits:
            try:
                fits["zhang"] = zhang_fit(y, cfg.r)
            except EstimationError:
                fits["zhang"] = None
        fit = fits["zhang"]
        if fit is None:
            return None
        if method == "zhang":
            return int(wald_stat(fit, GpdParams(gamma0, sigma0), k, sigma_matrix(fit.gamma, cfg.r)) <= crit)
        if method == "zhang_ci":
            return int(abs(fit.gamma - gamma0) <= crit * math.sqrt(sigma_matrix(fit.gamma, cfg.r)[0, 0] / k))
        try:
            stat = profile_sigma(y, gamma0, cfg.r, fit=fit).l_profile
        except ProfileFailure:
            stat = math.inf
        return int(stat <= crit)

    try:
        fit = mle_fit(y)
    except (FitFailure, EstimationError):
        return None
    return int(wald_stat(fit, GpdParams(gamma0, sigma0), k, mle_cov(fit.params.gamma)) <= crit)


def _replicate(cfg: _Config, rep: int) -> list:
    rng = replication_rng(cfg.seed, rep)
    x = sample(cfg.model, cfg.n, rng)
    gamma0 = cfg.model.tail_index
    out = []
    for k in cfg.k_values:
        ex = extract_excesses(x, k)
        sigma0 = true_scale(cfg.model, ex.threshold).sigma0
        fits: dict = {}
        for method, calib in cfg.methods:
            out.append(_covered(cfg, method, calib, ex.excesses, x, k, gamma0, sigma0, fits))
    return out


def _run_chunk(args):
    cfg, reps = args
    return [_replicate(cfg, rep) for rep in reps]


def run_coverage(model: ModelSpec, n: int, reps: int, k_values, methods, level: float = 0.95,
                 seed: int = 0, r: float = DEFAULT_R, threads: int = 1,
                 calib_reps: int = 10_000) -> list[CoverageRecord]:
    """Coverage of each method at each ``k`` over ``reps`` replications.

    Parameters
    ----------
    model : ModelSpec
        Population model of the full sample.
    n : int
        Sample size per replication.
    reps : int
        Number of replications.
    k_values : iterable of int
        Numbers of excesses; each must be below ``n``.
    methods : iterable of str
        Tokens ``el``, ``zhang``, ``ml``, ``elw``, ``elp``, ``zhang_ci``,
        optionally suffixed with a calibration (``el:chi2``, ``elw:fisher``).
    threads : int
        Worker processes; the output does not depend on it.

    Returns
    -------
    list of CoverageRecord
        Ordered by ``k`` then by method as given.
    """
    k_values = tuple(int(k) for k in k_values)
    if any(not 5 <= k < n for k in k_values):
        raise DomainError("every k must satisfy 5 <= k < n")
    parsed = tuple(parse_method(m) if isinstance(m, str) else tuple(m) for m in methods)
    if reps <= 0:
        return []

    criticals = {}
    for k in k_values:
        for method, calib in parsed:
            if method in ("el", "elw"):
                criticals[(method, calib, k)] = critical_value(level, 2 if method == "el" else 1, calib, k=k)
            elif method in ("zhang", "ml"):
                criticals[(method, calib, k)] = chi2_quantile(level, 2)
            elif method == "zhang_ci":
                criticals[(method, calib, k)] = normal_quantile(0.5 * (1.0 + level))
            else:
                criticals[(method, calib, k)] = exponential_calibration(k, level, calib_reps, seed)
    cfg = _Config(model, n, k_values, parsed, level, r, seed, criticals)

    indices = list(range(reps))
    if threads <= 1:
        results = _run_chunk((cfg, indices))
    else:
        chunks = [indices[i::threads] for i in range(threads)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_chunk, [(cfg, c) for c in chunks]))
        results = [None] * reps
        for chunk, part in zip(chunks, parts):
            for rep, res in zip(chunk, part):
                results[rep] = res

    records = []
    col = 0
    for k in k_values:
        for method, calib in parsed:
            outcomes = [res[col] for res in results]
            hits = sum(1 for o in outcomes if o == 1)
            fails = sum(1 for o in outcomes if o is None)
            records.append(CoverageRecord(model, n, k, method, calib, level, hits, reps - fails, fails))
            col += 1
    return records


def write_coverage_csv(records, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        w.writerow([rec.model.label(), rec.n, rec.k, rec.method, repr(rec.level), rec.calibration,
                    rec.reps, rec.valid_reps, rec.failures, repr(rec.coverage)])
