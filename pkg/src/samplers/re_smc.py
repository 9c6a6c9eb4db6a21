"""
Rare-event SMC estimators of Pr(phi(x) <= eps | theta).

fixed_re_smc follows a prespecified threshold schedule (unbiased estimator);
adapt_re_smc picks each threshold as the N_acc-th smallest particle distance
(O(1/N) bias, lower variance). Both:
  - start from N uniform latents,
  - keep the particles within the stage threshold, P_t = |I_t| / N,
  - multinomially resample the survivors and move them with slice updates that
    target the stage-t slice {phi <= eps_t},
  - skip resample/move at the final stage,
  - stop as soon as the running product drops below an optional bound.

Random streams: initial latents (0, i), resampling at stage t (t,), moves (t, i, r).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from src.contracts.errors import DegenerateThresholdError, StageLimitError
from src.contracts.schemas import (
    ADAPT_ACCEPT_FRACTION,
    ADAPT_MAX_STAGES,
    SLICE_INITIAL_WIDTH,
    SLICE_MAX_ITERATIONS,
)
from src.models.core import LikelihoodEstimate, ModelSpec, phi_closure
from src.samplers.slice import SliceConfig, adapt_width, slice_update
from src.samplers.streams import SeedLike, as_seed_sequence, generator, parallel_map


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdSchedule:
    epsilons: tuple[float, ...]

    def __post_init__(self) -> None:
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ValueError("threshold schedule is empty")
        if any(np.isnan(e) or e < 0 for e in eps):
            raise ValueError(f"thresholds must be nonnegative, got {eps}")
        if any(later >= earlier for earlier, later in zip(eps, eps[1:])):
            raise ValueError(f"thresholds must be strictly decreasing, got {eps}")
        object.__setattr__(self, "epsilons", eps)

    @property
    def target(self) -> float:
        return self.epsilons[-1]

    def __len__(self) -> int:
        return len(self.epsilons)


@dataclass(frozen=True)
class SmcConfig:
    particles: int
    epsilon: float
    n_accept: Optional[int] = None          # ADAPT only; defaults to N / 2
    slice_repeats: int = 1
    adaptive_width: bool = True
    max_stages: int = ADAPT_MAX_STAGES
    max_slice_iterations: int = SLICE_MAX_ITERATIONS
    workers: int = 1

    def __post_init__(self) -> None:
        if self.particles < 1:
            raise ValueError("particles must be positive")
        if np.isnan(self.epsilon) or self.epsilon < 0:
            raise ValueError(f"target epsilon must be nonnegative, got {self.epsilon}")
        if self.n_accept is not None and not (1 <= self.n_accept <= self.particles):
            raise ValueError(f"n_accept must lie in [1, {self.particles}], got {self.n_accept}")
        if self.slice_repeats < 1:
            raise ValueError("slice_repeats must be at least 1")

    @property
    def accept_count(self) -> int:
        if self.n_accept is not None:
            return self.n_accept
        return max(1, int(round(self.particles * ADAPT_ACCEPT_FRACTION)))


@dataclass
class SmcResult:
    estimate: LikelihoodEstimate
    stage_fractions: tuple[float, ...]
    epsilons_used: tuple[float, ...]
    terminated_early: bool
    wall_time: float
    simulator_calls: int
    budget_exhausted: bool = False
    widths: tuple[float, ...] = ()
    mean_slice_iterations: tuple[float, ...] = ()
    particles: int = 0

    @property
    def stages_completed(self) -> int:
        return len(self.stage_fractions)

    @property
    def log_partial_products(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.cumsum(np.log(np.asarray(self.stage_fractions, dtype=float)))

    @property
    def completed(self) -> bool:
        return not (self.terminated_early or self.budget_exhausted)


@dataclass
class _StageLog:
    fractions: list[float] = field(default_factory=list)
    epsilons: list[float] = field(default_factory=list)
    widths: list[float] = field(default_factory=list)
    slice_iterations: list[float] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

def resample_indices(accepted, n: int, rng: np.random.Generator) -> np.ndarray:
    """n IID uniform draws from the accepted index set (multinomial resampling)."""
    accepted = np.asarray(accepted, dtype=np.int64).reshape(-1)
    if accepted.size == 0:
        raise ValueError("cannot resample from an empty accepted set")
    return accepted[rng.integers(0, accepted.size, size=n)]


# ---------------------------------------------------------------------------
# Shared stage loop
# ---------------------------------------------------------------------------

ThresholdRule = Callable[[int, np.ndarray], float]
FinalRule = Callable[[int, float], bool]


def _accepted(phis: np.ndarray, epsilon: float) -> np.ndarray:
    return np.flatnonzero((phis <= epsilon) & np.isfinite(phis))


def _run_stages(
    model: ModelSpec,
    theta: np.ndarray,
    cfg: SmcConfig,
    seed: SeedLike,
    threshold_rule: ThresholdRule,
    is_final: FinalRule,
    log_bound: Optional[float],
    time_budget: Optional[float] = None,
    enforce_stage_limit: bool = False,
    stop_at_stage_limit: bool = False,
) -> SmcResult:
    start = time.perf_counter()
    seq = as_seed_sequence(seed)
    theta = np.asarray(theta, dtype=float)
    n = cfg.particles
    phi = phi_closure(model, theta)

    def _initial(i: int) -> tuple[np.ndarray, float]:
        x = generator(seq, 0, i).random(model.latent_dim)
        return x, phi(x)

    initial = parallel_map(_initial, range(n), cfg.workers)
    xs = np.stack([x for x, _ in initial])
    phis = np.array([v for _, v in initial], dtype=float)
    calls = n

    log = _StageLog()
    log_partial = 0.0
    width = SLICE_INITIAL_WIDTH
    t = 0

    def _result(estimate: LikelihoodEstimate, terminated: bool = False, exhausted: bool = False) -> SmcResult:
        return SmcResult(
            estimate=estimate,
            stage_fractions=tuple(log.fractions),
            epsilons_used=tuple(log.epsilons),
            terminated_early=terminated,
            wall_time=time.perf_counter() - start,
            simulator_calls=calls,
            budget_exhausted=exhausted,
            widths=tuple(log.widths),
            mean_slice_iterations=tuple(log.slice_iterations),
            particles=n,
        )

    while True:
        t += 1
        epsilon_t = threshold_rule(t, phis)
        accepted = _accepted(phis, epsilon_t)
        fraction = accepted.size / n
        log.fractions.append(fraction)
        log.epsilons.append(epsilon_t)

        if accepted.size == 0:
            return _result(LikelihoodEstimate.zero())

        log_partial += float(np.log(fraction))
        # Running product bounds the final estimate from above
        if log_bound is not None and log_partial < log_bound:
            return _result(LikelihoodEstimate(log_partial), terminated=True)

        if is_final(t, epsilon_t):
            return _result(LikelihoodEstimate(log_partial))

        if time_budget is not None and time.perf_counter() - start > time_budget:
            return _result(LikelihoodEstimate(log_partial), exhausted=True)

        if enforce_stage_limit and t >= cfg.max_stages:
            if stop_at_stage_limit:
                return _result(LikelihoodEstimate(log_partial), exhausted=True)
            raise StageLimitError(
                f"ADAPT-RE-SMC reached {cfg.max_stages} stages at eps={epsilon_t} "
                f"without reaching target {cfg.epsilon}"
            )

        parents = resample_indices(accepted, n, generator(seq, t))
        slice_cfg = SliceConfig(width=width, max_iterations=cfg.max_slice_iterations)

        def _move(i: int) -> tuple[np.ndarray, float, float, int]:
            x, value = xs[parents[i]], phis[parents[i]]
            max_z, iterations = 0.0, 0
            for r in range(cfg.slice_repeats):
                outcome = slice_update(x, phi, epsilon_t, slice_cfg, generator(seq, t, i, r), current_phi=value)
                x, value = outcome.new_point, outcome.phi_value
                max_z = max(max_z, outcome.final_abs_z)
                iterations += outcome.iterations_used
            return x, value, max_z, iterations

        moved = parallel_map(_move, range(n), cfg.workers)
        xs = np.stack([m[0] for m in moved])
        phis = np.array([m[1] for m in moved], dtype=float)
        z_bar = max(m[2] for m in moved)
        total_iterations = sum(m[3] for m in moved)
        calls += total_iterations

        log.widths.append(width)
        log.slice_iterations.append(total_iterations / (n * cfg.slice_repeats))
        width = adapt_width(z_bar) if cfg.adaptive_width else SLICE_INITIAL_WIDTH


def adaptive_threshold(phis, n_accept: int, target: float) -> float:
    """max(n_accept-th smallest phi, target); at least n_accept particles lie within it."""
    phis = np.asarray(phis, dtype=float)
    kth = float(np.partition(phis, n_accept - 1)[n_accept - 1])
    if not np.isfinite(kth):
        raise DegenerateThresholdError(
            f"{int(np.sum(~np.isfinite(phis)))} of {phis.size} particles have infinite phi; "
            f"no finite threshold keeps {n_accept} of them"
        )
    return max(kth, target)


def _log_bound(bound: Optional[float], log_bound: Optional[float]) -> Optional[float]:
    if bound is not None and log_bound is not None:
        raise ValueError("pass either bound or log_bound, not both")
    if bound is not None:
        if bound < 0 or np.isnan(bound):
            raise ValueError(f"bound must be nonnegative, got {bound}")
        with np.errstate(divide="ignore"):
            return float(np.log(bound))
    return log_bound


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def fixed_re_smc(
    model: ModelSpec,
    theta,
    schedule: ThresholdSchedule,
    cfg: SmcConfig,
    seed: SeedLike,
    bound: Optional[float] = None,
    *,
    log_bound: Optional[float] = None,
) -> SmcResult:
    """
    FIXED-RE-SMC: unbiased estimate of Pr(phi(x) <= schedule.target | theta).

    A single-stage schedule (eps,) is plain Monte Carlo with N samples.
    """
    eps = schedule.epsilons
    return _run_stages(
        model,
        np.asarray(theta, dtype=float),
        cfg,
        seed,
        threshold_rule=lambda t, _phis: eps[t - 1],
        is_final=lambda t, _eps: t == len(eps),
        log_bound=_log_bound(bound, log_bound),
    )


def adapt_re_smc(
    model: ModelSpec,
    theta,
    cfg: SmcConfig,
    seed: SeedLike,
    bound: Optional[float] = None,
    *,
    log_bound: Optional[float] = None,
    time_budget: Optional[float] = None,
    stop_at_stage_limit: bool = False,
) -> SmcResult:
    """
    ADAPT-RE-SMC: eps_t = max(N_acc-th smallest phi, target eps); stops when eps_t == eps.

    With time_budget, stops after the first stage that ends past the budget and marks
    the result budget_exhausted (used to tune eps). Reaching max_stages raises
    StageLimitError, or with stop_at_stage_limit ends the run the same way.
    """
    k = cfg.accept_count
    target = cfg.epsilon

    def _threshold(_t: int, phis: np.ndarray) -> float:
        return adaptive_threshold(phis, k, target)

    return _run_stages(
        model,
        np.asarray(theta, dtype=float),
        cfg,
        seed,
        threshold_rule=_threshold,
        is_final=lambda _t, eps_t: eps_t == target,
        log_bound=_log_bound(bound, log_bound),
        time_budget=time_budget,
        enforce_stage_limit=True,
        stop_at_stage_limit=stop_at_stage_limit,
    )


def schedule_from_pilot(result: SmcResult) -> ThresholdSchedule:
    """Thresholds of a completed ADAPT run with repeated values removed."""
    if result.terminated_early:
        raise ValueError("cannot build a schedule from an early-terminated run")
    if result.budget_exhausted:
        raise ValueError("cannot build a schedule from a run stopped by its time budget")
    if not result.epsilons_used:
        raise ValueError("run recorded no thresholds")
    deduped: list[float] = []
    for eps in result.epsilons_used:
        if not deduped or eps != deduped[-1]:
            deduped.append(eps)
    return ThresholdSchedule(tuple(deduped))
