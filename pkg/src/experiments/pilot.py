"""
The `pilot` command: the tuning pipeline that prepares a FIXED-RE-ABC run.

  1. pilot draws (rejection ABC, or a short ADAPT-RE-ABC chain) -> mu_hat, Sigma_hat
  2. optionally tune eps with a time-budgeted ADAPT-RE-SMC run at mu_hat
  3. ADAPT-RE-SMC at mu_hat -> deduplicated threshold schedule
  4. particle doubling until the log-likelihood variance reaches the target

Writes pilot.txt (mean, covariance, particles, epsilon, schedule) and schedule.txt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.contracts.config import RunConfig, require
from src.contracts.errors import ConfigError, TuningError
from src.contracts.schemas import PILOT_FILENAME, SCHEDULE_FILENAME
from src.experiments.run import build_model, smc_config
from src.models.core import ModelSpec
from src.pipeline.export import header_lines, write_pilot, write_schedule
from src.samplers.baselines import abc_rejection
from src.samplers.pmmh import (
    ChainConfig,
    PilotSummary,
    PmmhConfig,
    ProposalConfig,
    pilot_summary,
    re_abc,
    tune_particles,
    tune_epsilon,
    tune_proposal,
)
from src.samplers.re_smc import SmcConfig, ThresholdSchedule, adapt_re_smc, schedule_from_pilot
from src.samplers.streams import substream

# Stream keys of the pilot stages below the run seed
_DRAWS, _EPSILON, _SCHEDULE, _PARTICLES = 1, 2, 3, 4


@dataclass
class PilotOutcome:
    summary: PilotSummary
    epsilon: float
    schedule: ThresholdSchedule
    particles: int
    paths: list[Path] = field(default_factory=list)


def _pilot_draws(config: RunConfig, model: ModelSpec, epsilon: float) -> np.ndarray:
    settings = config.pilot
    seed = substream(config.seed, _DRAWS)
    if settings.method == "rejection":
        result = abc_rejection(
            model,
            epsilon,
            seed,
            target_accepts=settings.draws,
            max_attempts=settings.max_attempts,
            workers=config.workers,
        )
        print(f"[pilot] rejection: {result.accepts} accepts in {result.attempts:,} attempts at eps={epsilon}")
        if result.accepts < 2:
            raise TuningError(f"pilot rejection run produced {result.accepts} draws: {result.diagnostic}")
        return result.accepted_params

    dim = model.param_dim
    cov = require(config, "pilot", "proposal_cov", settings.proposal_cov or config.pmmh.proposal_cov)
    initial = require(config, "pmmh", "initial_theta", config.pmmh.initial_theta)
    chain = ChainConfig(
        initial_theta=np.array(initial),
        iterations=settings.chain_iterations,
        proposal=ProposalConfig(np.array(cov).reshape(dim, dim)),
    )
    smc = smc_config(config, settings.adapt_particles, epsilon)
    trace = re_abc(model, PmmhConfig(chain=chain, smc=smc), seed)
    print(f"[pilot] ADAPT-RE-ABC chain: {settings.chain_iterations} iterations, acceptance {trace.acceptance_rate:.3f}")
    return trace.thetas


def cmd_pilot(config: RunConfig) -> PilotOutcome:
    """Run the tuning pipeline and write the pilot summary and schedule."""
    settings = config.pilot
    model = build_model(config.model)
    epsilon = config.epsilon
    pilot_epsilon = settings.epsilon if settings.epsilon is not None else epsilon
    pilot_epsilon = require(config, "pilot", "epsilon", pilot_epsilon)
    if settings.max_particles < settings.initial_particles:
        raise ConfigError("[pilot] max_particles is below initial_particles", path=str(config.path))

    draws = _pilot_draws(config, model, pilot_epsilon)
    summary = pilot_summary(draws)
    tune_proposal(summary)
    mean = summary.mean
    if not model.in_support(mean):
        raise TuningError(f"pilot mean {mean} is outside the prior support")
    print(f"[pilot] mu_hat = {np.array2string(mean, precision=4)}")

    if settings.time_budget is not None:
        base = smc_config(config, settings.adapt_particles, 0.0)
        epsilon = tune_epsilon(model, mean, settings.time_budget, base, substream(config.seed, _EPSILON))
        print(f"[pilot] time budget {settings.time_budget}s reached eps={epsilon:.6g}")
    epsilon = require(config, "run", "epsilon", epsilon)

    adapt = adapt_re_smc(
        model,
        mean,
        smc_config(config, settings.adapt_particles, epsilon),
        substream(config.seed, _SCHEDULE),
    )
    schedule = schedule_from_pilot(adapt)
    print(f"[pilot] schedule: {len(schedule)} thresholds ending at {schedule.target}")

    particles = tune_particles(
        model,
        mean,
        schedule,
        settings.target_variance,
        substream(config.seed, _PARTICLES),
        smc=SmcConfig(
            particles=settings.initial_particles,
            epsilon=epsilon,
            slice_repeats=config.smc.slice_repeats,
            workers=config.workers,
        ),
        initial_particles=settings.initial_particles,
        max_particles=settings.max_particles,
        replicates=settings.replicates,
    )
    print(f"[pilot] recommended particles N={particles}")

    header = header_lines(config.snapshot(), config.seed)
    schedule_path = write_schedule(schedule, config.out / SCHEDULE_FILENAME, header)
    pilot_path = write_pilot(summary, particles, epsilon, SCHEDULE_FILENAME, config.out / PILOT_FILENAME, header)
    return PilotOutcome(summary, epsilon, schedule, particles, [pilot_path, schedule_path])
