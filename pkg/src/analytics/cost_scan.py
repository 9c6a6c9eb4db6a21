"""
Cost-scaling harness: simulator calls and wall time per effective sample across a grid
of thresholds and data dimensions, for rejection ABC, ABC-MCMC and RE-ABC.

Rejection cost should grow like eps^{-D}; RE-ABC's like a polynomial in D log(1/eps),
with the RE-SMC stage count linear in log(1/eps). fit_cost_scaling measures all three.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
import polars as pl
from scipy import stats

from src.analytics.diagnostics import ess_imse
from src.contracts.config import RunConfig, require
from src.contracts.errors import ConfigError, ReAbcError
from src.contracts.schemas import (
    COST_SCAN_FILENAME,
    COST_SCAN_FIT_FILENAME,
    COST_SCAN_METHODS,
    COST_SCAN_SCHEMA,
    GAUSSIAN_TRUE_SIGMA,
)
from src.models.gaussian import GaussianModel, exact_gaussian_mh
from src.pipeline.export import header_lines, write_cost_scan, write_key_values
from src.pipeline.ingest import load_gaussian_observations
from src.samplers.baselines import abc_mcmc, abc_rejection
from src.samplers.pmmh import (
    ChainConfig,
    PmmhConfig,
    ProposalConfig,
    pilot_summary,
    re_abc,
    tune_proposal,
)
from src.samplers.re_smc import SmcConfig, adapt_re_smc
from src.samplers.streams import SeedLike, substream

_PILOT_ITERATIONS = 2000


@dataclass(frozen=True)
class ScanSettings:
    epsilons: Sequence[float]
    dims: Sequence[int]
    theta: float
    methods: Sequence[str] = COST_SCAN_METHODS
    iterations: int = 200
    particles: int = 50
    accepts: int = 50
    max_attempts: Optional[int] = None
    stage_replicates: int = 5
    workers: int = 1


@dataclass(frozen=True)
class CostScalingFit:
    rejection_slopes: dict[int, float] = field(default_factory=dict)
    stage_fits: dict[int, tuple[float, float]] = field(default_factory=dict)   # dim -> (slope, R^2)
    re_abc_quadratic: Optional[tuple[float, float, float]] = None

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for dim, slope in self.rejection_slopes.items():
            out[f"rejection_log_cost_slope_d{dim}"] = slope
        for dim, (slope, r2) in self.stage_fits.items():
            out[f"re_abc_stages_slope_d{dim}"] = slope
            out[f"re_abc_stages_r2_d{dim}"] = r2
        if self.re_abc_quadratic is not None:
            out["re_abc_cost_quadratic"] = list(self.re_abc_quadratic)
        return out


# ---------------------------------------------------------------------------
# Rows
# ---------------------------------------------------------------------------

def _row(epsilon: float, dim: int, method: str, calls: int, wall: float, effective: float,
         mean_stages: Optional[float] = None) -> dict[str, Any]:
    flagged = not effective > 0
    return {
        "epsilon": float(epsilon),
        "dim": int(dim),
        "method": method,
        "simulator_calls": int(calls),
        "wall_time": float(wall),
        "effective_samples": float(effective),
        "time_per_effective_sample": None if flagged else wall / effective,
        "calls_per_effective_sample": None if flagged else calls / effective,
        "mean_stages": mean_stages,
        "flagged": flagged,
    }


def _chain_effective(thetas: np.ndarray) -> float:
    report = ess_imse(thetas[:, 0])
    return 0.0 if report.degenerate else report.ess


def _proposal_for(model: GaussianModel, theta: float, seed: SeedLike) -> ProposalConfig:
    """Random-walk proposal tuned on an exact-likelihood pilot chain for this data subset."""
    pilot_chain = ChainConfig(
        initial_theta=np.array([theta]),
        iterations=_PILOT_ITERATIONS,
        proposal=ProposalConfig(np.array([[1.0]])),
    )
    pilot = exact_gaussian_mh(model.y_obs, pilot_chain, seed, model=model)
    return tune_proposal(pilot_summary(pilot.thetas))


def _scan_cell(model: GaussianModel, epsilon: float, method: str, settings: ScanSettings,
               proposal: ProposalConfig, seed) -> dict[str, Any]:
    theta = np.array([settings.theta])
    dim = model.n_obs

    if method == "abc-reject":
        result = abc_rejection(
            model, epsilon, seed,
            target_accepts=settings.accepts,
            max_attempts=settings.max_attempts,
            workers=settings.workers,
        )
        return _row(epsilon, dim, method, result.attempts, result.wall_time, result.accepts)

    chain = ChainConfig(initial_theta=theta, iterations=settings.iterations, proposal=proposal)
    start = time.perf_counter()
    try:
        if method == "abc-mcmc":
            trace = abc_mcmc(model, chain, epsilon, seed)
            mean_stages = None
        else:
            smc = SmcConfig(particles=settings.particles, epsilon=epsilon, workers=settings.workers)
            trace = re_abc(model, PmmhConfig(chain=chain, smc=smc), seed)
            stages = [
                adapt_re_smc(model, theta, smc, substream(seed, 0, 2_000_000, r)).stages_completed
                for r in range(settings.stage_replicates)
            ]
            mean_stages = float(np.mean(stages))
    except ReAbcError as exc:
        print(f"[cost_scan] {method} at eps={epsilon}, D={dim} failed: {exc}")
        return _row(epsilon, dim, method, 0, time.perf_counter() - start, 0.0)
    return _row(
        epsilon, dim, method,
        trace.simulator_calls,
        time.perf_counter() - start,
        _chain_effective(trace.thetas),
        mean_stages,
    )


def cost_scan(model: GaussianModel, settings: ScanSettings, seed: SeedLike) -> pl.DataFrame:
    """One row per (dim, epsilon, method); streams are keyed by grid position."""
    unknown = [m for m in settings.methods if m not in COST_SCAN_METHODS]
    if unknown:
        raise ValueError(f"Unknown cost-scan methods {unknown}, expected {COST_SCAN_METHODS}")
    if not settings.epsilons or not settings.dims:
        raise ValueError("cost scan needs at least one epsilon and one dimension")

    rows = []
    for i, dim in enumerate(settings.dims):
        sub = model.subset(dim)
        needs_proposal = any(m != "abc-reject" for m in settings.methods)
        proposal = _proposal_for(sub, settings.theta, substream(seed, i, 1_000_000)) if needs_proposal else None
        for j, epsilon in enumerate(settings.epsilons):
            for k, method in enumerate(settings.methods):
                row = _scan_cell(sub, epsilon, method, settings, proposal, substream(seed, i, j, k))
                rows.append(row)
                print(
                    f"[cost_scan] D={dim} eps={epsilon:g} {method}: "
                    f"{row['simulator_calls']:,} calls, {row['effective_samples']:.1f} effective"
                )
    return pl.DataFrame(rows, schema=COST_SCAN_SCHEMA)


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------

def fit_cost_scaling(rows: pl.DataFrame) -> CostScalingFit:
    """
    Per dimension: slope of log(calls per accept) on log(1/eps) for rejection ABC and
    a linear fit of RE-SMC stage count on log(1/eps). Over all dimensions: quadratic
    fit of RE-ABC calls per effective sample in D log(1/eps). Flagged rows are skipped.
    """
    usable = rows.filter(~pl.col("flagged"))
    rejection_slopes: dict[int, float] = {}
    stage_fits: dict[int, tuple[float, float]] = {}

    for dim in sorted(usable["dim"].unique().to_list()):
        reject = usable.filter((pl.col("method") == "abc-reject") & (pl.col("dim") == dim))
        if reject["epsilon"].n_unique() >= 2:
            fit = stats.linregress(
                np.log(1.0 / reject["epsilon"].to_numpy()),
                np.log(reject["calls_per_effective_sample"].to_numpy()),
            )
            rejection_slopes[dim] = float(fit.slope)

        smc_rows = rows.filter(
            (pl.col("method") == "re-abc") & (pl.col("dim") == dim) & pl.col("mean_stages").is_not_null()
        )
        if smc_rows["epsilon"].n_unique() >= 2:
            fit = stats.linregress(np.log(1.0 / smc_rows["epsilon"].to_numpy()), smc_rows["mean_stages"].to_numpy())
            stage_fits[dim] = (float(fit.slope), float(fit.rvalue ** 2))

    quadratic = None
    re_rows = usable.filter(pl.col("method") == "re-abc")
    if re_rows.height >= 3:
        scale = re_rows["dim"].to_numpy() * np.log(1.0 / re_rows["epsilon"].to_numpy())
        coefficients = np.polyfit(scale, re_rows["calls_per_effective_sample"].to_numpy(), 2)
        quadratic = tuple(float(c) for c in coefficients)

    return CostScalingFit(rejection_slopes=rejection_slopes, stage_fits=stage_fits, re_abc_quadratic=quadratic)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def run(config: RunConfig) -> tuple[pl.DataFrame, CostScalingFit]:
    """Cost scan described by the [cost_scan] section of a RunConfig; writes CSV and fit report."""
    if config.model.kind != "gaussian":
        raise ConfigError("cost-scan needs the gaussian model (variable data dimension)", path=str(config.path))
    scan = config.cost_scan
    require(config, "cost_scan", "epsilons", scan.epsilons or None)
    model = GaussianModel(
        load_gaussian_observations(config.model.data),
        distance=config.model.distance,
        prior_upper=config.model.prior_upper,
    )
    settings = ScanSettings(
        epsilons=scan.epsilons,
        dims=scan.dims or (model.n_obs,),
        theta=scan.theta[0] if scan.theta else GAUSSIAN_TRUE_SIGMA,
        methods=scan.methods,
        iterations=scan.iterations,
        particles=scan.particles,
        accepts=scan.accepts,
        max_attempts=scan.max_attempts,
        stage_replicates=scan.stage_replicates,
        workers=config.workers,
    )
    rows = cost_scan(model, settings, config.seed)
    if not config.record_timing:
        rows = rows.with_columns(
            pl.lit(0.0).alias("wall_time"),
            pl.when(pl.col("flagged")).then(pl.lit(None, dtype=pl.Float64)).otherwise(0.0).alias("time_per_effective_sample"),
        )
    fit = fit_cost_scaling(rows)

    header = header_lines(config.snapshot(), config.seed)
    write_cost_scan(rows, config.out / COST_SCAN_FILENAME, header)
    write_key_values(fit.as_dict(), config.out / COST_SCAN_FIT_FILENAME, header)
    return rows, fit
