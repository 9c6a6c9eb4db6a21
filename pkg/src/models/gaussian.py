"""
Gaussian test model: n IID N(0, sigma^2) observations, sigma ~ Uniform(0, upper).

The simulator is y_i = sigma * Phi^{-1}(x_i), smooth in (sigma, x). An exact-likelihood
MH sampler on the same prior gives the ground truth the ABC runs are scored against.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from src.contracts.schemas import GAUSSIAN_DISTANCES, GAUSSIAN_PRIOR_UPPER
from src.models.core import Distribution, ModelSpec, quantile
from src.samplers.pmmh import ChainConfig, Trace, exact_estimator, run_metropolis_hastings
from src.samplers.streams import SeedLike

_STANDARD_NORMAL = Distribution.standard_normal()


def gaussian_simulate(sigma: float, x) -> np.ndarray:
    """y_i = sigma * quantile(standard-normal, x_i)."""
    if sigma < 0 or np.isnan(sigma):
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    return sigma * np.asarray(quantile(_STANDARD_NORMAL, np.asarray(x, dtype=float)), dtype=float)


def gaussian_log_likelihood(sigma: float, y) -> float:
    """Exact log-likelihood of IID N(0, sigma^2) data; -inf for sigma <= 0."""
    y = np.asarray(y, dtype=float)
    if not sigma > 0:
        return -np.inf
    n = y.size
    return float(-n * np.log(sigma) - np.dot(y, y) / (2.0 * sigma * sigma) - 0.5 * n * np.log(2.0 * np.pi))


class GaussianModel(ModelSpec):
    """
    Unknown-scale Gaussian model. theta = (sigma,), latent dimension = len(y_obs).

    distance: "raw-euclidean" compares the vectors in observation order,
    "sorted-euclidean" compares their order statistics.
    """

    param_dim = 1

    def __init__(
        self,
        y_obs,
        distance: str = "raw-euclidean",
        prior_upper: float = GAUSSIAN_PRIOR_UPPER,
    ) -> None:
        y_obs = np.asarray(y_obs, dtype=float).reshape(-1)
        if y_obs.size == 0:
            raise ValueError("y_obs is empty")
        if distance not in GAUSSIAN_DISTANCES:
            raise ValueError(f"Unknown distance '{distance}', expected one of {GAUSSIAN_DISTANCES}")
        if not prior_upper > 0:
            raise ValueError(f"prior upper bound must be positive, got {prior_upper}")
        self.y_obs = y_obs
        self.distance = distance
        self.prior_upper = float(prior_upper)
        self.latent_dim = y_obs.size
        self._y_sorted = np.sort(y_obs)

    @property
    def n_obs(self) -> int:
        return self.latent_dim

    def subset(self, dim: int) -> "GaussianModel":
        """The same model restricted to the first `dim` observations (cost scans over D)."""
        if not 1 <= dim <= self.n_obs:
            raise ValueError(f"subset dimension must lie in [1, {self.n_obs}], got {dim}")
        return GaussianModel(self.y_obs[:dim], distance=self.distance, prior_upper=self.prior_upper)

    def prior_log_density(self, theta: np.ndarray) -> float:
        sigma = float(np.asarray(theta, dtype=float).reshape(-1)[0])
        if 0.0 < sigma < self.prior_upper:
            return -float(np.log(self.prior_upper))
        return -np.inf

    def prior_sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([rng.uniform(0.0, self.prior_upper)])

    def prior_sample_batch(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(0.0, self.prior_upper, size=(n, 1))

    def phi(self, theta: np.ndarray, x: np.ndarray) -> float:
        y = gaussian_simulate(float(theta[0]), x)
        if self.distance == "sorted-euclidean":
            return float(np.linalg.norm(np.sort(y) - self._y_sorted))
        return float(np.linalg.norm(y - self.y_obs))

    def phi_batch(self, thetas: np.ndarray, xs: np.ndarray) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float).reshape(-1, 1)
        ys = thetas * np.asarray(quantile(_STANDARD_NORMAL, np.asarray(xs, dtype=float)), dtype=float)
        if self.distance == "sorted-euclidean":
            return np.linalg.norm(np.sort(ys, axis=1) - self._y_sorted, axis=1)
        return np.linalg.norm(ys - self.y_obs, axis=1)

    def log_likelihood(self, theta: np.ndarray) -> float:
        return gaussian_log_likelihood(float(np.asarray(theta).reshape(-1)[0]), self.y_obs)


def exact_gaussian_mh(
    y_obs,
    chain: ChainConfig,
    seed: SeedLike,
    prior_upper: float = GAUSSIAN_PRIOR_UPPER,
    model: Optional[GaussianModel] = None,
) -> Trace:
    """MH on sigma with the exact likelihood; proposals outside (0, upper) are rejected by the prior."""
    model = model or GaussianModel(y_obs, prior_upper=prior_upper)
    snapshot = {
        "method": "exact-mh",
        "iterations": chain.iterations,
        "prior_upper": model.prior_upper,
        "proposal_covariance": chain.proposal.covariance.tolist(),
    }
    return run_metropolis_hastings(
        model.prior_log_density,
        exact_estimator(model.log_likelihood),
        chain,
        seed,
        config_snapshot=snapshot,
    )
