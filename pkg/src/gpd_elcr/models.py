"""Heavy-tailed parametric models, inverse-CDF sampling and excess extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

FAMILIES = ("gpd", "frechet", "burr")


@dataclass(frozen=True)
class GpdParams:
    gamma: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive (heavy-tail regime), got {self.gamma!r}")


@dataclass(frozen=True)
class ModelSpec:
    """A parametric model for the full sample.

    ``params`` holds ``(gamma, sigma)`` for GPD, ``(gamma,)`` for Frechet
    and ``(lam, tau)`` for Burr, whose survival function is
    ``(1 + x**tau) ** (-1/lam)``.
    """

    family: str
    params: tuple

    def __post_init__(self):
        expected = {"gpd": 2, "frechet": 1, "burr": 2}
        if self.family not in expected:
            raise DomainError(f"unknown model family {self.family!r}")
        if len(self.params) != expected[self.family]:
            raise DomainError(f"{self.family} takes {expected[self.family]} parameter(s)")
        if not all(p > 0 for p in self.params):
            raise DomainError("model parameters must be strictly positive")

    @property
    def tail_index(self) -> float:
        if self.family == "burr":
            lam, tau = self.params
            # survival ~ x**(-tau/lam)
            return lam / tau
        return self.params[0]

    def label(self) -> str:
        return f"{self.family}:" + ",".join(f"{p:g}" for p in self.params)

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        """Parse ``gpd:g,s`` | ``frechet:g`` | ``burr:lam,tau``."""
        try:
            family, _, rest = text.strip().partition(":")
            params = tuple(float(v) for v in rest.split(","))
        except ValueError as exc:
            raise DomainError(f"cannot parse model {text!r}") from exc
        return cls(family.lower(), params)


@dataclass(frozen=True)
class ExcessSample:
    threshold: float
    excesses: np.ndarray
    n_total: int

    @property
    def k(self) -> int:
        return int(self.excesses.size)


def gpd_quantile(u, p: GpdParams):
    u = np.asarray(u, dtype=float)
    return p.sigma * np.expm1(-p.gamma * np.log1p(-u)) / p.gamma


def gpd_cdf(x, p: GpdParams):
    x = np.asarray(x, dtype=float)
    return -np.expm1(-np.log1p(p.gamma * x / p.sigma) / p.gamma)


def quantile(model: ModelSpec, u):
    """Inverse CDF of the model at probabilities ``u``."""
    u = np.asarray(u, dtype=float)
    if model.family == "gpd":
        return gpd_quantile(u, GpdParams(*model.params))
    if model.family == "frechet":
        (g,) = model.params
        return (-np.log(u)) ** (-g)
    lam, tau = model.params
    # survival v = 1 - u; x = (v**(-lam) - 1) ** (1/tau)
    return np.expm1(-lam * np.log1p(-u)) ** (1.0 / tau)


def cdf(model: ModelSpec, x):
    x = np.asarray(x, dtype=float)
    if model.family == "gpd":
        return gpd_cdf(x, GpdParams(*model.params))
    if model.family == "frechet":
        (g,) = model.params
        return np.exp(-(x ** (-1.0 / g)))
    lam, tau = model.params
    return -np.expm1(-np.log1p(x ** tau) / lam)


def survival(model: ModelSpec, x):
    x = np.asarray(x, dtype=float)
    if model.family == "gpd":
        g, s = model.params
        return np.exp(-np.log1p(g * x / s) / g)
    if model.family == "frechet":
        (g,) = model.params
        return -np.expm1(-(x ** (-1.0 / g)))
    lam, tau = model.params
    return np.exp(-np.log1p(x ** tau) / lam)


def sample(model: ModelSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. values by inverse transform from one uniform stream."""
    if n < 1:
        raise DomainError("n must be >= 1")
    u = rng.random(n)
    # rng.random lies in [0, 1); 0 maps to the lower support end for every family
    # except Frechet, where -log(0) is infinite, so reflect onto (0, 1]
    if model.family == "frechet":
        u = 1.0 - u
    return quantile(model, u)


def extract_excesses(data, k: int) -> ExcessSample:
    """Excesses of the ``k`` largest values over the (k+1)-th largest.

    Ties are broken by original index order (stable sort), so a tie at the
    threshold position yields a zero excess and is rejected.
    """
    x = np.asarray(data, dtype=float)
    n = x.size
    if not (5 <= k < n):
        raise DomainError(f"need 5 <= k < n, got k={k}, n={n}")
    order = np.sort(x, kind="stable")
    threshold = float(order[n - k - 1])
    excesses = order[n - k:] - threshold
    if not excesses[0] > 0:
        raise DomainError("tie at the threshold order statistic; excesses must be positive")
    return ExcessSample(threshold=threshold, excesses=excesses, n_total=n)


def tail_quantile(model: ModelSpec, t):
    """U(t) = inverse survival function at 1/t, for t > 1."""
    t = np.asarray(t, dtype=float)
    return quantile(model, -np.expm1(-np.log(t)))


def tail_quantile_deriv(model: ModelSpec, t):
    """Closed-form derivative of U(t)."""
    t = np.asarray(t, dtype=float)
    if model.family == "gpd":
        g, s = model.params
        return s * t ** (g - 1.0)
    if model.family == "frechet":
        (g,) = model.params
        ell = -np.log1p(-1.0 / t)
        return g * ell ** (-g - 1.0) / (t * (t - 1.0))
    lam, tau = model.params
    tl = t ** lam
    return (lam / tau) * t ** (lam - 1.0) * (tl - 1.0) ** (1.0 / tau - 1.0)

