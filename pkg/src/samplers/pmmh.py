"""
Pseudo-marginal Metropolis-Hastings with RE-SMC likelihood estimates (RE-ABC),
plus the pilot-based tuning of proposal, particle count and threshold.

The MH loop is generic over the likelihood estimator so that RE-ABC, ABC-MCMC and
exact-likelihood MH share one acceptance rule. All arithmetic is in log space.

Random streams: iteration t (t >= 1) draws theta' and u from (t,) and seeds its
estimator with (t, 1); the initial estimate uses (0, retry).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
import polars as pl
from scipy import stats

from src.contracts.errors import InitialLikelihoodError, TuningError
from src.contracts.schemas import (
    INITIAL_LIKELIHOOD_RETRIES,
    MAX_ZERO_ESTIMATE_FRACTION,
    PROPOSAL_SCALE,
    TUNE_INITIAL_PARTICLES,
    TUNE_MAX_PARTICLES,
    TUNE_REPLICATES,
    theta_columns,
    trace_schema,
)
from src.models.core import LikelihoodEstimate, ModelSpec
from src.samplers.re_smc import SmcConfig, SmcResult, ThresholdSchedule, adapt_re_smc, fixed_re_smc
from src.samplers.streams import generator, substream

# (theta, seed, log_bound) -> estimator result; log_bound is None when early stop is off
Estimator = Callable[[np.ndarray, np.random.SeedSequence, Optional[float]], SmcResult]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProposalConfig:
    """Gaussian random-walk proposal N(theta, covariance)."""

    covariance: np.ndarray

    def __post_init__(self) -> None:
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape[0] != cov.shape[1]:
            raise ValueError(f"proposal covariance must be square, got shape {cov.shape}")
        if not np.allclose(cov, cov.T):
            raise ValueError("proposal covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(cov)) < -1e-12 * max(1.0, float(np.max(np.abs(cov)))):
            raise ValueError("proposal covariance must be positive semidefinite")
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def _factor(self) -> np.ndarray:
        # Eigen factorisation tolerates singular covariances
        values, vectors = np.linalg.eigh(self.covariance)
        return vectors * np.sqrt(np.clip(values, 0.0, None))

    def sample(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return theta + self._factor() @ rng.standard_normal(self.dim)

    def log_density(self, theta_to: np.ndarray, theta_from: np.ndarray) -> float:
        """log q(theta_to | theta_from)."""
        return float(stats.multivariate_normal(mean=theta_from, cov=self.covariance, allow_singular=True).logpdf(theta_to))


@dataclass(frozen=True)
class PilotSummary:
    mean: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True)
class ChainConfig:
    initial_theta: np.ndarray
    iterations: int
    proposal: ProposalConfig
    early_termination: bool = True
    max_initial_retries: int = INITIAL_LIKELIHOOD_RETRIES

    def __post_init__(self) -> None:
        theta = np.asarray(self.initial_theta, dtype=float).reshape(-1)
        if theta.size != self.proposal.dim:
            raise ValueError(f"initial theta has dimension {theta.size}, proposal has {self.proposal.dim}")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        object.__setattr__(self, "initial_theta", theta)


@dataclass(frozen=True)
class PmmhConfig:
    chain: ChainConfig
    smc: SmcConfig
    schedule: Optional[ThresholdSchedule] = None   # None -> ADAPT-RE-SMC

    def __post_init__(self) -> None:
        if self.schedule is not None and self.schedule.target != self.smc.epsilon:
            raise ValueError(
                f"schedule ends at {self.schedule.target} but target epsilon is {self.smc.epsilon}"
            )

    @property
    def mode(self) -> str:
        return "adaptive" if self.schedule is None else "fixed"


@dataclass(frozen=True)
class ChainRecord:
    iteration: int
    theta: np.ndarray
    log_like: float
    accepted: bool
    smc_stages: int
    smc_time: float
    smc_terminated_early: bool
    simulator_calls: int
    zero_estimate: bool = False


@dataclass
class Trace:
    records: list[ChainRecord]
    seed: int
    initial_theta: np.ndarray
    initial_log_like: float
    initial_simulator_calls: int = 0
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def thetas(self) -> np.ndarray:
        return np.stack([r.theta for r in self.records])

    @property
    def log_likes(self) -> np.ndarray:
        return np.array([r.log_like for r in self.records], dtype=float)

    @property
    def accepted(self) -> np.ndarray:
        return np.array([r.accepted for r in self.records], dtype=bool)

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if self.records else 0.0

    @property
    def simulator_calls(self) -> int:
        return self.initial_simulator_calls + sum(r.simulator_calls for r in self.records)

    @property
    def smc_time(self) -> float:
        return sum(r.smc_time for r in self.records)

    @property
    def zero_estimate_fraction(self) -> float:
        ran = [r for r in self.records if r.smc_stages > 0]
        return sum(r.zero_estimate for r in ran) / len(ran) if ran else 0.0

    def to_frame(self, record_timing: bool = True) -> pl.DataFrame:
        dim = self.initial_theta.size
        thetas = self.thetas if self.records else np.empty((0, dim))
        data: dict[str, Any] = {"iter": [r.iteration for r in self.records]}
        for j, col in enumerate(theta_columns(dim)):
            data[col] = thetas[:, j].tolist()
        data["log_like"] = self.log_likes.tolist()
        data["accepted"] = self.accepted.tolist()
        data["smc_stages"] = [r.smc_stages for r in self.records]
        data["smc_time_s"] = [r.smc_time if record_timing else 0.0 for r in self.records]
        data["terminated_early"] = [r.smc_terminated_early for r in self.records]
        data["sim_calls"] = [r.simulator_calls for r in self.records]
        return pl.DataFrame(data, schema=trace_schema(dim))


# ---------------------------------------------------------------------------
# Acceptance rule
# ---------------------------------------------------------------------------

def log_early_termination_bound(
    u: float,
    theta_prev: np.ndarray,
    theta_prop: np.ndarray,
    log_like_prev: float,
    prior_log_density: Callable[[np.ndarray], float],
    proposal: ProposalConfig,
) -> float:
    """log[u pi(theta) L q(theta'|theta) / (pi(theta') q(theta|theta'))]; an estimate below it is rejected."""
    log_prior_prop = prior_log_density(theta_prop)
    if not np.isfinite(log_prior_prop):
        raise ValueError("early termination bound needs a proposal inside the prior support")
    with np.errstate(divide="ignore"):
        log_u = float(np.log(u))
    log_q_forward = proposal.log_density(theta_prop, theta_prev)
    log_q_reverse = proposal.log_density(theta_prev, theta_prop)
    return log_u + prior_log_density(theta_prev) + log_like_prev + log_q_forward - log_prior_prop - log_q_reverse


def early_termination_bound(
    u: float,
    theta_prev,
    theta_prop,
    log_like_prev: float,
    model: ModelSpec,
    proposal: ProposalConfig,
) -> float:
    """Bound on the running RE-SMC product below which the MH step must reject."""
    log_bound = log_early_termination_bound(
        u,
        np.asarray(theta_prev, dtype=float),
        np.asarray(theta_prop, dtype=float),
        log_like_prev,
        model.prior_log_density,
        proposal,
    )
    return float(np.exp(log_bound))


def run_metropolis_hastings(
    prior_log_density: Callable[[np.ndarray], float],
    estimator: Estimator,
    chain: ChainConfig,
    seed: int,
    config_snapshot: Optional[dict[str, Any]] = None,
) -> Trace:
    """
    Pseudo-marginal MH. The carried log-likelihood is only replaced on acceptance.

    A proposal is accepted iff its estimate is nonzero and log L' >= log bound, which is
    the MH rule u <= ratio rearranged; early termination uses the same bound, so
    decisions do not depend on whether it is enabled.
    """
    theta = chain.initial_theta.copy()
    log_prior = prior_log_density(theta)
    if not np.isfinite(log_prior):
        raise ValueError(f"initial theta {theta} is outside the prior support")

    initial_calls = 0
    log_like = -np.inf
    for retry in range(chain.max_initial_retries):
        result = estimator(theta, substream(seed, 0, retry), None)
        initial_calls += result.simulator_calls
        if not result.estimate.is_zero:
            log_like = result.estimate.log_value
            break
    if not np.isfinite(log_like):
        raise InitialLikelihoodError(
            f"likelihood estimate at initial theta {theta} was zero in {chain.max_initial_retries} attempts"
        )
    initial_log_like = log_like

    records: list[ChainRecord] = []
    for t in range(1, chain.iterations + 1):
        rng = generator(seed, t)
        theta_prop = chain.proposal.sample(theta, rng)
        u = rng.uniform()

        if not np.isfinite(prior_log_density(theta_prop)):
            records.append(ChainRecord(t, theta.copy(), log_like, False, 0, 0.0, False, 0))
            continue

        log_bound = log_early_termination_bound(u, theta, theta_prop, log_like, prior_log_density, chain.proposal)
        result = estimator(theta_prop, substream(seed, t, 1), log_bound if chain.early_termination else None)
        estimate = result.estimate
        accept = (not result.terminated_early) and (not estimate.is_zero) and estimate.log_value >= log_bound

        if accept:
            theta = np.asarray(theta_prop, dtype=float)
            log_like = estimate.log_value
        records.append(ChainRecord(
            iteration=t,
            theta=theta.copy(),
            log_like=log_like,
            accepted=accept,
            smc_stages=result.stages_completed,
            smc_time=result.wall_time,
            smc_terminated_early=result.terminated_early,
            simulator_calls=result.simulator_calls,
            zero_estimate=estimate.is_zero and not result.terminated_early,
        ))

    return Trace(
        records=records,
        seed=seed,
        initial_theta=chain.initial_theta.copy(),
        initial_log_like=initial_log_like,
        initial_simulator_calls=initial_calls,
        config=config_snapshot or {},
    )


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def smc_estimator(model: ModelSpec, smc: SmcConfig, schedule: Optional[ThresholdSchedule]) -> Estimator:
    """FIXED-RE-SMC when a schedule is given, ADAPT-RE-SMC otherwise."""
    if schedule is not None:
        return lambda theta, seed, log_bound: fixed_re_smc(model, theta, schedule, smc, seed, log_bound=log_bound)
    return lambda theta, seed, log_bound: adapt_re_smc(model, theta, smc, seed, log_bound=log_bound)


def exact_estimator(log_likelihood: Callable[[np.ndarray], float]) -> Estimator:
    """Wraps a closed-form log-likelihood so it can drive run_metropolis_hastings."""

    def _estimate(theta: np.ndarray, _seed: np.random.SeedSequence, _log_bound: Optional[float]) -> SmcResult:
        start = time.perf_counter()
        value = float(log_likelihood(theta))
        return SmcResult(
            estimate=LikelihoodEstimate(value),
            stage_fractions=(),
            epsilons_used=(),
            terminated_early=False,
            wall_time=time.perf_counter() - start,
            simulator_calls=0,
        )

    return _estimate


def re_abc(model: ModelSpec, config: PmmhConfig, seed: int) -> Trace:
    """RE-ABC: PMMH whose likelihood estimates come from RE-SMC with slice-sampling moves."""
    snapshot = {
        "method": f"re-abc-{config.mode}",
        "particles": config.smc.particles,
        "n_accept": config.smc.accept_count if config.schedule is None else None,
        "epsilon": config.smc.epsilon,
        "schedule": list(config.schedule.epsilons) if config.schedule is not None else None,
        "iterations": config.chain.iterations,
        "early_termination": config.chain.early_termination,
        "proposal_covariance": config.chain.proposal.covariance.tolist(),
    }
    return run_metropolis_hastings(
        model.prior_log_density,
        smc_estimator(model, config.smc, config.schedule),
        config.chain,
        seed,
        config_snapshot=snapshot,
    )


# ---------------------------------------------------------------------------
# Tuning
# ---------------------------------------------------------------------------

def pilot_summary(samples) -> PilotSummary:
    """Posterior mean and covariance estimates from pilot draws (rows = draws)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < 2:
        raise TuningError("pilot needs at least two draws to estimate a covariance")
    covariance = np.atleast_2d(np.cov(samples, rowvar=False))
    return PilotSummary(mean=samples.mean(axis=0), covariance=covariance)


def tune_proposal(pilot: PilotSummary) -> ProposalConfig:
    """Random-walk covariance (2.562^2 / dim) * Sigma_hat."""
    sigma = np.atleast_2d(np.asarray(pilot.covariance, dtype=float))
    if not np.any(sigma):
        raise TuningError("pilot covariance is zero; the pilot run is degenerate")
    dim = sigma.shape[0]
    return ProposalConfig(covariance=(PROPOSAL_SCALE ** 2 / dim) * sigma)


def tune_particles(
    model: ModelSpec,
    theta,
    schedule: Optional[ThresholdSchedule],
    target_var: float,
    seed: int,
    smc: Optional[SmcConfig] = None,
    initial_particles: int = TUNE_INITIAL_PARTICLES,
    max_particles: int = TUNE_MAX_PARTICLES,
    replicates: int = TUNE_REPLICATES,
) -> int:
    """
    Smallest N in (N0, 2 N0, ...) whose replicate log-likelihood variance is <= target_var.

    Zero estimates are left out of the variance and counted. Raises TuningError when
    more than half of the replicates at the largest N tried were zero; if the target is
    never met, the largest N is returned.
    """
    theta = np.asarray(theta, dtype=float)
    if not model.in_support(theta):
        raise ValueError(f"theta {theta} is outside the prior support")
    epsilon = schedule.target if schedule is not None else (smc.epsilon if smc is not None else None)
    if epsilon is None:
        raise ValueError("tune_particles needs a schedule or an SmcConfig with a target epsilon")

    n = initial_particles
    level = 0
    while True:
        cfg = SmcConfig(
            particles=n,
            epsilon=epsilon,
            n_accept=None,
            slice_repeats=smc.slice_repeats if smc is not None else 1,
            workers=smc.workers if smc is not None else 1,
        )
        estimator = smc_estimator(model, cfg, schedule)
        logs = np.array([
            estimator(theta, substream(seed, level, r), None).estimate.log_value for r in range(replicates)
        ])
        finite = logs[np.isfinite(logs)]
        zeros = replicates - finite.size
        variance = float(np.var(finite, ddof=1)) if finite.size >= 2 else np.inf
        print(f"[tune_particles] N={n}: log-likelihood variance {variance:.3f}, {zeros}/{replicates} zero estimates")

        if variance <= target_var and zeros / replicates <= MAX_ZERO_ESTIMATE_FRACTION:
            return n
        if n * 2 > max_particles:
            if zeros / replicates > MAX_ZERO_ESTIMATE_FRACTION:
                raise TuningError(
                    f"{zeros}/{replicates} zero likelihood estimates at N={n}; "
                    "epsilon is too small for this theta"
                )
            print(f"[tune_particles] target variance {target_var} not reached; using N={n}")
            return n
        n *= 2
        level += 1


def tune_epsilon(model: ModelSpec, theta, time_budget: float, cfg: SmcConfig, seed: int) -> float:
    """
    Run ADAPT-RE-SMC towards eps = 0 until the time budget or cfg.max_stages runs out;
    return the last threshold reached.
    """
    if not time_budget > 0:
        raise ValueError("time_budget must be positive")
    zero_target = SmcConfig(
        particles=cfg.particles,
        epsilon=0.0,
        n_accept=cfg.n_accept,
        slice_repeats=cfg.slice_repeats,
        adaptive_width=cfg.adaptive_width,
        max_stages=cfg.max_stages,
        max_slice_iterations=cfg.max_slice_iterations,
        workers=cfg.workers,
    )
    result = adapt_re_smc(model, theta, zero_target, seed, time_budget=time_budget, stop_at_stage_limit=True)
    return result.epsilons_used[-1]

