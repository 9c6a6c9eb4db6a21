"""
Reference ABC algorithms: rejection sampling and ABC-MCMC.

Rejection attempts are drawn in fixed-size batches with one rng stream per batch and
scanned in order, so the accepted set does not depend on the worker count.
ABC-MCMC is the pseudo-marginal chain driven by a one-particle, one-stage RE-SMC
estimate, i.e. the indicator 1[phi(theta', x) <= eps].
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.contracts.errors import InitialLikelihoodError
from src.contracts.schemas import REJECTION_BATCH_SIZE, START_SEARCH_ATTEMPTS
from src.models.core import ModelSpec
from src.samplers.pmmh import ChainConfig, Trace, run_metropolis_hastings, smc_estimator
from src.samplers.re_smc import SmcConfig, ThresholdSchedule
from src.samplers.streams import SeedLike, generator, parallel_map, substream

# Stream for the rejection search of the initial state, disjoint from (t,) and (0, retry)
_START_STREAM = (0, 1_000_000)


@dataclass
class RejectionResult:
    accepted_params: np.ndarray          # (accepts, dim)
    attempts: int
    wall_time: float
    distances: np.ndarray
    epsilon: float
    diagnostic: Optional[str] = None

    @property
    def accepts(self) -> int:
        return int(self.accepted_params.shape[0])

    @property
    def acceptance_rate(self) -> float:
        return self.accepts / self.attempts if self.attempts else 0.0


def abc_rejection(
    model: ModelSpec,
    epsilon: float,
    seed: SeedLike,
    target_accepts: Optional[int] = None,
    max_attempts: Optional[int] = None,
    workers: int = 1,
    batch_size: int = REJECTION_BATCH_SIZE,
) -> RejectionResult:
    """
    Draw theta from the prior and x uniformly, keep theta when phi(theta, x) <= eps.

    Stops at target_accepts acceptances or max_attempts attempts, whichever comes first.
    Running out of attempts with no acceptance is reported in `diagnostic`, not raised.
    """
    if epsilon < 0 or np.isnan(epsilon):
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    if target_accepts is None and max_attempts is None:
        raise ValueError("give target_accepts, max_attempts or both")
    if target_accepts is not None and target_accepts < 1:
        raise ValueError("target_accepts must be positive")

    start = time.perf_counter()
    accepted: list[np.ndarray] = []
    distances: list[float] = []
    attempts = 0
    batch = 0

    def _simulate(index: int) -> tuple[np.ndarray, np.ndarray]:
        rng = generator(seed, index)
        thetas = model.prior_sample_batch(rng, batch_size)
        xs = rng.random((batch_size, model.latent_dim))
        return thetas, model.phi_batch(thetas, xs)

    done = False
    while not done:
        indices = list(range(batch, batch + max(1, workers)))
        batch += len(indices)
        for thetas, phis in parallel_map(_simulate, indices, workers):
            for theta, value in zip(thetas, phis):
                if max_attempts is not None and attempts >= max_attempts:
                    done = True
                    break
                attempts += 1
                if value <= epsilon and np.isfinite(value):
                    accepted.append(np.asarray(theta, dtype=float))
                    distances.append(float(value))
                    if target_accepts is not None and len(accepted) >= target_accepts:
                        done = True
                        break
            if done:
                break

    params = np.stack(accepted) if accepted else np.empty((0, model.param_dim))
    diagnostic = None
    if not accepted:
        diagnostic = f"no acceptances in {attempts} attempts at eps={epsilon}"
    return RejectionResult(
        accepted_params=params,
        attempts=attempts,
        wall_time=time.perf_counter() - start,
        distances=np.asarray(distances, dtype=float),
        epsilon=epsilon,
        diagnostic=diagnostic,
    )


def abc_mcmc(
    model: ModelSpec,
    chain: Optional[ChainConfig],
    epsilon: float,
    seed: int,
    proposal=None,
    iterations: Optional[int] = None,
) -> Trace:
    """
    ABC-MCMC targeting pi(theta) Pr(phi <= eps | theta).

    With chain=None the initial state is found by rejection sampling at eps, and
    `proposal` and `iterations` must be given.
    """
    if chain is None:
        if proposal is None or iterations is None:
            raise ValueError("abc_mcmc without a chain config needs proposal and iterations")
        start = abc_rejection(
            model, epsilon, substream(seed, *_START_STREAM), target_accepts=1, max_attempts=START_SEARCH_ATTEMPTS
        )
        if start.accepts == 0:
            raise InitialLikelihoodError(f"ABC-MCMC start search failed: {start.diagnostic}")
        chain = ChainConfig(initial_theta=start.accepted_params[0], iterations=iterations, proposal=proposal)

    indicator = smc_estimator(model, SmcConfig(particles=1, epsilon=epsilon), ThresholdSchedule((epsilon,)))
    snapshot = {
        "method": "abc-mcmc",
        "epsilon": epsilon,
        "iterations": chain.iterations,
        "proposal_covariance": chain.proposal.covariance.tolist(),
    }
    return run_metropolis_hastings(model.prior_log_density, indicator, chain, seed, config_snapshot=snapshot)
