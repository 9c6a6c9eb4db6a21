"""
The `run` command: build the model from a RunConfig, run the configured method and
write the trace (or rejection sample) and the summary report.

Usage:
    python -m src.main run --config configs/gaussian_fixed.ini
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from src.analytics.diagnostics import summarize_trace
from src.contracts.config import ModelConfig, RunConfig, require
from src.contracts.errors import ConfigError, TuningError
from src.contracts.schemas import (
    ADAPT_MAX_STAGES,
    REJECTION_FILENAME,
    REJECTION_SIDECAR_FILENAME,
    SUMMARY_FILENAME,
    TRACE_FILENAME,
    theta_columns,
)
from src.models.core import ModelSpec
from src.models.epidemic import EpidemicModel, summarize_epidemic_trace
from src.models.gaussian import GaussianModel
from src.pipeline.export import header_lines, write_key_values, write_rejection, write_trace
from src.pipeline.ingest import load_gaussian_observations, read_pilot, read_removal_data, read_schedule
from src.samplers.baselines import abc_mcmc, abc_rejection
from src.samplers.pmmh import ChainConfig, PmmhConfig, ProposalConfig, Trace, re_abc, tune_proposal
from src.samplers.re_smc import SmcConfig, ThresholdSchedule


@dataclass
class RunOutcome:
    method: str
    report: dict[str, Any]
    paths: list[Path] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Building blocks shared with the pilot command
# ---------------------------------------------------------------------------

def build_model(model: ModelConfig) -> ModelSpec:
    if model.kind == "gaussian":
        gaussian = GaussianModel(
            load_gaussian_observations(model.data),
            distance=model.distance,
            prior_upper=model.prior_upper,
        )
        return gaussian.subset(model.dim) if model.dim is not None else gaussian
    return EpidemicModel(model.variant, read_removal_data(model.data), k_penalty=model.k_penalty)


def smc_config(config: RunConfig, particles: int, epsilon: float) -> SmcConfig:
    try:
        return SmcConfig(
            particles=particles,
            epsilon=epsilon,
            n_accept=config.smc.n_accept,
            slice_repeats=config.smc.slice_repeats,
            adaptive_width=config.smc.adaptive_width,
            max_stages=config.smc.max_stages or ADAPT_MAX_STAGES,
            workers=config.workers,
        )
    except ValueError as exc:
        raise ConfigError(f"[smc]: {exc}", path=str(config.path)) from None


@dataclass
class _Resolved:
    epsilon: float
    initial_theta: Optional[np.ndarray]
    proposal: Optional[ProposalConfig]
    particles: Optional[int]
    schedule: Optional[ThresholdSchedule]


def _resolve(config: RunConfig) -> _Resolved:
    """Merge explicit config keys with a pilot file; explicit keys win."""
    pilot, extra = (None, {})
    if config.pmmh.pilot is not None:
        pilot, extra = read_pilot(config.pmmh.pilot)

    epsilon = config.epsilon if config.epsilon is not None else extra.get("epsilon")
    epsilon = require(config, "run", "epsilon", epsilon)
    dim = config.model.param_dim

    initial = config.pmmh.initial_theta
    initial_theta = np.array(initial) if initial is not None else (pilot.mean if pilot is not None else None)

    proposal = None
    if config.pmmh.proposal_cov is not None:
        try:
            proposal = ProposalConfig(np.array(config.pmmh.proposal_cov).reshape(dim, dim))
        except ValueError as exc:
            raise ConfigError(f"[pmmh] proposal_cov: {exc}", path=str(config.path)) from None
    elif pilot is not None:
        try:
            proposal = tune_proposal(pilot)
        except TuningError as exc:
            raise ConfigError(f"[pmmh] pilot: {exc}", path=str(config.path)) from None

    schedule_path = config.smc.schedule or extra.get("schedule")
    schedule = None
    if config.method == "re-abc-fixed":
        schedule_path = require(config, "smc", "schedule", schedule_path)
        if not Path(schedule_path).exists():
            raise ConfigError(f"schedule file not found: {schedule_path}", path=str(config.path))
        try:
            schedule = read_schedule(schedule_path)
        except ValueError as exc:
            raise ConfigError(str(exc), path=str(config.path)) from None
        if schedule.target != epsilon:
            raise ConfigError(
                f"schedule {schedule_path} ends at {schedule.target}, run epsilon is {epsilon}",
                path=str(config.path),
            )

    particles = config.smc.particles if config.smc.particles is not None else extra.get("particles")
    return _Resolved(epsilon, initial_theta, proposal, particles, schedule)


# ---------------------------------------------------------------------------
# Methods
# ---------------------------------------------------------------------------

def _run_rejection(config: RunConfig, model: ModelSpec, epsilon: float) -> RunOutcome:
    settings = config.rejection
    if settings.accepts is None and settings.max_attempts is None:
        require(config, "rejection", "accepts", None)
    result = abc_rejection(
        model,
        epsilon,
        config.seed,
        target_accepts=settings.accepts,
        max_attempts=settings.max_attempts,
        workers=config.workers,
    )
    header = header_lines(config.snapshot(), config.seed)
    out = config.out
    paths = [
        write_rejection(
            result,
            out / REJECTION_FILENAME,
            out / REJECTION_SIDECAR_FILENAME,
            config.snapshot(),
            config.seed,
            record_timing=config.record_timing,
        ),
    ]
    report: dict[str, Any] = {
        "method": "rejection",
        "epsilon": epsilon,
        "accepts": result.accepts,
        "attempts": result.attempts,
        "acceptance_rate": result.acceptance_rate,
    }
    if result.accepts:
        for j, col in enumerate(theta_columns(model.param_dim)):
            report[f"{col}_mean"] = float(result.accepted_params[:, j].mean())
            if result.accepts > 1:
                report[f"{col}_sd"] = float(result.accepted_params[:, j].std(ddof=1))
        report["calls_per_accept"] = result.attempts / result.accepts
        if config.record_timing:
            report["time_per_accept_s"] = result.wall_time / result.accepts
    else:
        report["diagnostic"] = result.diagnostic
    paths.append(write_key_values(report, out / SUMMARY_FILENAME, header))
    return RunOutcome("rejection", report, paths)


def _run_chain(config: RunConfig, model: ModelSpec, resolved: _Resolved) -> Trace:
    iterations = require(config, "pmmh", "iterations", config.pmmh.iterations)
    proposal = require(config, "pmmh", "proposal_cov", resolved.proposal)

    if config.method == "abc-mcmc":
        chain = None
        if resolved.initial_theta is not None:
            chain = ChainConfig(
                initial_theta=resolved.initial_theta,
                iterations=iterations,
                proposal=proposal,
                early_termination=config.pmmh.early_termination,
            )
        return abc_mcmc(model, chain, resolved.epsilon, config.seed, proposal=proposal, iterations=iterations)

    initial = require(config, "pmmh", "initial_theta", resolved.initial_theta)
    particles = require(config, "smc", "particles", resolved.particles)
    chain = ChainConfig(
        initial_theta=initial,
        iterations=iterations,
        proposal=proposal,
        early_termination=config.pmmh.early_termination,
    )
    pmmh = PmmhConfig(
        chain=chain,
        smc=smc_config(config, particles, resolved.epsilon),
        schedule=resolved.schedule if config.method == "re-abc-fixed" else None,
    )
    print(
        f"[re_abc] {config.method}: {iterations} iterations, N={particles}, eps={resolved.epsilon}"
        + (f", {len(resolved.schedule)} stages" if pmmh.schedule is not None else "")
    )
    return re_abc(model, pmmh, config.seed)


def cmd_run(config: RunConfig) -> RunOutcome:
    """Run the configured method; returns the summary report and the written paths."""
    model = build_model(config.model)
    if config.method == "rejection":
        epsilon = require(config, "run", "epsilon", config.epsilon)
        return _run_rejection(config, model, epsilon)

    if config.pmmh.iterations is not None and config.burn_in >= config.pmmh.iterations:
        raise ConfigError(
            f"[run] burn_in {config.burn_in} leaves no iterations of {config.pmmh.iterations}",
            path=str(config.path),
        )
    resolved = _resolve(config)
    trace = _run_chain(config, model, resolved)

    out = config.out
    paths = [write_trace(trace, out / TRACE_FILENAME, config.snapshot(), record_timing=config.record_timing)]
    report: dict[str, Any] = {"method": config.method, "epsilon": resolved.epsilon}
    report.update(summarize_trace(
        trace.to_frame(record_timing=config.record_timing),
        burn_in=config.burn_in,
        zero_estimate_fraction=trace.zero_estimate_fraction,
    ))
    report["initial_simulator_calls"] = trace.initial_simulator_calls
    if isinstance(model, EpidemicModel):
        kept = trace.thetas[config.burn_in:]
        for key, (mean, sd) in summarize_epidemic_trace(model.variant, kept).items():
            report[f"{key}_posterior_mean"] = mean
            report[f"{key}_posterior_sd"] = sd

    header = header_lines(config.snapshot(), config.seed)
    paths.append(write_key_values(report, out / SUMMARY_FILENAME, header))
    print(f"[re_abc] acceptance rate {trace.acceptance_rate:.3f}, {trace.simulator_calls:,} simulator calls")
    return RunOutcome(config.method, report, paths)
