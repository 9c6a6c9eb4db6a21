"""
Model abstraction shared by every sampler.

A model is the triple (prior, deterministic simulator y(theta, x), distance d) collapsed
into phi(theta, x) = d(y(theta, x), y_obs). All simulation randomness lives in the
latent vector x, uniform on [0, 1]^m; simulators turn latents into draws with quantile().
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from src.contracts.schemas import QUANTILE_U_MAX, QUANTILE_U_MIN

DISTRIBUTION_KINDS = ("standard-normal", "exponential", "gamma", "weibull")


# ---------------------------------------------------------------------------
# Distributions and quantiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Distribution:
    """
    Distribution used to map a uniform latent to a simulator input.

    exponential(rate), gamma(shape, rate) and weibull(shape, scale=1) are
    parameterised as in the epidemic models; standard-normal takes no parameters.
    """

    kind: str
    shape: float = 1.0
    rate: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in DISTRIBUTION_KINDS:
            raise ValueError(f"Unknown distribution '{self.kind}', expected one of {DISTRIBUTION_KINDS}")
        if not (np.isfinite(self.shape) and self.shape > 0):
            raise ValueError(f"{self.kind}: shape must be positive, got {self.shape}")
        if not (np.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"{self.kind}: rate must be positive, got {self.rate}")

    @classmethod
    def standard_normal(cls) -> "Distribution":
        return cls("standard-normal")

    @classmethod
    def exponential(cls, rate: float) -> "Distribution":
        return cls("exponential", rate=rate)

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "Distribution":
        return cls("gamma", shape=shape, rate=rate)

    @classmethod
    def weibull(cls, shape: float) -> "Distribution":
        return cls("weibull", shape=shape)

    @property
    def mean(self) -> float:
        if self.kind == "standard-normal":
            return 0.0
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "gamma":
            return self.shape / self.rate
        return float(special.gamma(1.0 + 1.0 / self.shape))

    @property
    def std(self) -> float:
        if self.kind == "standard-normal":
            return 1.0
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "gamma":
            return float(np.sqrt(self.shape) / self.rate)
        g1 = special.gamma(1.0 + 1.0 / self.shape)
        g2 = special.gamma(1.0 + 2.0 / self.shape)
        return float(np.sqrt(max(g2 - g1 * g1, 0.0)))

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "standard-normal":
            out = special.ndtr(v)
        elif self.kind == "exponential":
            out = -np.expm1(-self.rate * np.maximum(v, 0.0))
        elif self.kind == "gamma":
            out = special.gammainc(self.shape, self.rate * np.maximum(v, 0.0))
        else:
            out = -np.expm1(-np.power(np.maximum(v, 0.0), self.shape))
        return out if out.ndim else float(out)


def quantile(dist: Distribution, u):
    """
    Inverse CDF F^{-1}(u), vectorised over u.

    u of exactly 0 or 1 is clamped to [1e-300, 1 - 1e-16] so unbounded supports map
    to finite values; the result is monotone nondecreasing in u.
    """
    u = np.asarray(u, dtype=float)
    if np.any((u < 0.0) | (u > 1.0)) or np.any(np.isnan(u)):
        raise ValueError("quantile: u must lie in [0, 1]")
    uc = np.clip(u, QUANTILE_U_MIN, QUANTILE_U_MAX)

    if dist.kind == "standard-normal":
        out = special.ndtri(uc)
    elif dist.kind == "exponential":
        out = -np.log1p(-uc) / dist.rate
    elif dist.kind == "gamma":
        # Regularised incomplete gamma inversion
        out = special.gammaincinv(dist.shape, uc) / dist.rate
    else:
        out = np.power(-np.log1p(-uc), 1.0 / dist.shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Likelihood estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LikelihoodEstimate:
    """
    ABC likelihood estimate, stored in log space.

    The V(eps)^{-1} normalising factor is theta-independent and never computed.
    """

    log_value: float

    @classmethod
    def from_value(cls, value: float) -> "LikelihoodEstimate":
        if value < 0:
            raise ValueError(f"Likelihood estimate must be nonnegative, got {value}")
        return cls(float(np.log(value)) if value > 0 else -np.inf)

    @classmethod
    def zero(cls) -> "LikelihoodEstimate":
        return cls(-np.inf)

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))

    @property
    def is_zero(self) -> bool:
        return self.log_value == -np.inf


# ---------------------------------------------------------------------------
# Model interface
# ---------------------------------------------------------------------------

class ModelSpec(ABC):
    """
    Prior, simulator and distance of one ABC model.

    Implementations hold no mutable state touched by phi: the same instance is
    evaluated concurrently by RE-SMC workers.
    """

    param_dim: int
    latent_dim: int

    @abstractmethod
    def prior_log_density(self, theta: np.ndarray) -> float:
        """Log prior density; -inf outside the support."""

    @abstractmethod
    def prior_sample(self, rng: np.random.Generator) -> np.ndarray:
        ...

    @abstractmethod
    def phi(self, theta: np.ndarray, x: np.ndarray) -> float:
        """Distance between the simulation y(theta, x) and the observations."""

    def prior_sample_batch(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.stack([self.prior_sample(rng) for _ in range(n)])

    def phi_batch(self, thetas: np.ndarray, xs: np.ndarray) -> np.ndarray:
        return np.array([self.phi(t, x) for t, x in zip(thetas, xs)], dtype=float)

    def in_support(self, theta: np.ndarray) -> bool:
        return bool(np.isfinite(self.prior_log_density(theta)))


def phi(model: ModelSpec, theta, x) -> float:
    """Evaluate phi with dimension checks against the model."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if theta.size != model.param_dim:
        raise ValueError(f"theta has dimension {theta.size}, model expects {model.param_dim}")
    if x.size != model.latent_dim:
        raise ValueError(f"x has dimension {x.size}, model expects {model.latent_dim}")
    return float(model.phi(theta, x))


def phi_closure(model: ModelSpec, theta: np.ndarray) -> Callable[[np.ndarray], float]:
    """Phi as a function of the latents only, theta held fixed."""
    theta = np.asarray(theta, dtype=float)
    return lambda x: float(model.phi(theta, x))


def within_threshold(value: float, epsilon: float) -> bool:
    """Acceptance test shared by every sampler. +inf distances never pass."""
    return value <= epsilon and value < np.inf


class FixedParameterModel(ModelSpec):
    """Wraps a model with a point-mass prior at theta, e.g. for fixed-theta cost scans."""

    def __init__(self, model: ModelSpec, theta):
        self.model = model
        self.theta = np.asarray(theta, dtype=float).reshape(-1)
        if self.theta.size != model.param_dim:
            raise ValueError("theta dimension does not match the wrapped model")
        self.param_dim = model.param_dim
        self.latent_dim = model.latent_dim

    def prior_log_density(self, theta: np.ndarray) -> float:
        return 0.0 if np.array_equal(np.asarray(theta, dtype=float), self.theta) else -np.inf

    def prior_sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.theta.copy()

    def prior_sample_batch(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.tile(self.theta, (n, 1))

    def phi(self, theta: np.ndarray, x: np.ndarray) -> float:
        return self.model.phi(theta, x)

    def phi_batch(self, thetas: np.ndarray, xs: np.ndarray) -> np.ndarray:
        return self.model.phi_batch(thetas, xs)
