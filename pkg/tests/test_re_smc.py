import numpy as np
import pytest
from scipy import stats

from src.contracts.errors import DegenerateThresholdError, StageLimitError
from src.models.core import LikelihoodEstimate
from src.samplers.re_smc import (
    SmcConfig,
    SmcResult,
    ThresholdSchedule,
    adapt_re_smc,
    adaptive_threshold,
    fixed_re_smc,
    resample_indices,
    schedule_from_pilot,
)
from tests.conftest import BoxModel, ConstantModel

THETA = np.array([0.5])


def test_schedule_must_strictly_decrease():
    with pytest.raises(ValueError):
        ThresholdSchedule((0.3, 0.3))
    with pytest.raises(ValueError):
        ThresholdSchedule(())
    with pytest.raises(ValueError):
        ThresholdSchedule((0.2, -0.1))
    assert ThresholdSchedule((0.5, 0.2)).target == 0.2


def test_smc_config_validation():
    with pytest.raises(ValueError):
        SmcConfig(particles=0, epsilon=0.1)
    with pytest.raises(ValueError):
        SmcConfig(particles=10, epsilon=0.1, n_accept=11)
    assert SmcConfig(particles=10, epsilon=0.1).accept_count == 5
    assert SmcConfig(particles=1, epsilon=0.1).accept_count == 1


def test_zero_distance_gives_estimate_one(zero_model):
    schedule = ThresholdSchedule((0.5, 0.2, 0.1))
    result = fixed_re_smc(zero_model, THETA, schedule, SmcConfig(particles=20, epsilon=0.1), seed=3)
    assert result.estimate.log_value == 0.0
    assert result.stages_completed == 3
    assert result.stage_fractions == (1.0, 1.0, 1.0)

    adapt = adapt_re_smc(zero_model, THETA, SmcConfig(particles=20, epsilon=0.1), seed=3)
    assert adapt.estimate.log_value == 0.0
    assert adapt.epsilons_used == (0.1,)


def test_single_stage_schedule_is_plain_monte_carlo(first_coordinate_model):
    result = fixed_re_smc(
        first_coordinate_model, THETA, ThresholdSchedule((0.3,)), SmcConfig(particles=2000, epsilon=0.3), seed=9
    )
    assert result.stages_completed == 1
    assert result.simulator_calls == 2000
    assert result.estimate.value == pytest.approx(0.3, abs=0.04)


def test_empty_stage_gives_zero_estimate(first_coordinate_model):
    result = fixed_re_smc(
        first_coordinate_model, THETA, ThresholdSchedule((0.5, 0.0)), SmcConfig(particles=50, epsilon=0.0), seed=4
    )
    assert result.estimate.is_zero
    assert result.stages_completed == 2
    assert result.completed


def test_fixed_estimator_is_close_to_the_true_probability():
    model = BoxModel(3)
    schedule = ThresholdSchedule((0.5, 0.3, 0.2, 0.1))
    cfg = SmcConfig(particles=100, epsilon=0.1)
    values = [fixed_re_smc(model, THETA, schedule, cfg, seed=r).estimate.value for r in range(40)]
    assert np.mean(values) == pytest.approx(BoxModel.probability(0.1, 3), rel=0.25)


def test_adaptive_estimator_is_close_to_the_true_probability():
    model = BoxModel(3)
    cfg = SmcConfig(particles=200, epsilon=0.1)
    results = [adapt_re_smc(model, THETA, cfg, seed=r) for r in range(30)]
    values = [r.estimate.value for r in results]
    assert np.mean(values) == pytest.approx(BoxModel.probability(0.1, 3), rel=0.25)
    for result in results:
        assert result.epsilons_used[-1] == 0.1
        assert all(b <= a for a, b in zip(result.epsilons_used, result.epsilons_used[1:]))
        assert all(0.0 < f <= 1.0 for f in result.stage_fractions)
        assert all(f >= cfg.accept_count / cfg.particles for f in result.stage_fractions)


def test_same_seed_reproduces_the_estimate_for_any_worker_count(box_model):
    cfg = SmcConfig(particles=40, epsilon=0.05)
    serial = adapt_re_smc(box_model, THETA, cfg, seed=12)
    again = adapt_re_smc(box_model, THETA, cfg, seed=12)
    threaded = adapt_re_smc(box_model, THETA, SmcConfig(particles=40, epsilon=0.05, workers=3), seed=12)
    assert serial.estimate == again.estimate == threaded.estimate
    assert serial.epsilons_used == threaded.epsilons_used
    assert serial.simulator_calls == threaded.simulator_calls


def test_early_termination_stops_below_the_bound(box_model):
    schedule = ThresholdSchedule((0.25, 0.1))
    result = fixed_re_smc(box_model, THETA, schedule, SmcConfig(particles=200, epsilon=0.1), seed=5, bound=0.5)
    assert result.terminated_early
    assert result.stages_completed == 1
    assert result.estimate.log_value < np.log(0.5)


def test_bound_and_log_bound_are_exclusive(box_model):
    schedule = ThresholdSchedule((0.1,))
    with pytest.raises(ValueError):
        fixed_re_smc(box_model, THETA, schedule, SmcConfig(particles=5, epsilon=0.1), seed=1, bound=0.1, log_bound=-1.0)


def test_adaptive_stage_limit(box_model):
    cfg = SmcConfig(particles=20, epsilon=1e-9, max_stages=2)
    with pytest.raises(StageLimitError):
        adapt_re_smc(box_model, THETA, cfg, seed=0)


def test_time_budget_marks_the_result(box_model):
    cfg = SmcConfig(particles=20, epsilon=0.0)
    result = adapt_re_smc(box_model, THETA, cfg, seed=0, time_budget=1e-9)
    assert result.budget_exhausted
    assert result.stages_completed == 1
    with pytest.raises(ValueError):
        schedule_from_pilot(result)


def test_schedule_from_pilot_removes_repeats():
    result = SmcResult(
        estimate=LikelihoodEstimate(-1.0),
        stage_fractions=(0.5, 0.5, 1.0, 0.5),
        epsilons_used=(0.4, 0.2, 0.2, 0.1),
        terminated_early=False,
        wall_time=0.0,
        simulator_calls=0,
    )
    assert schedule_from_pilot(result).epsilons == (0.4, 0.2, 0.1)


def test_resample_draws_only_accepted_indices():
    picks = resample_indices([2, 5, 7], 500, np.random.default_rng(0))
    assert set(picks.tolist()) == {2, 5, 7}
    with pytest.raises(ValueError):
        resample_indices([], 3, np.random.default_rng(0))


def test_resample_frequencies_are_uniform_over_the_accepted_set():
    accepted = np.arange(10)
    picks = resample_indices(accepted, 5000, np.random.default_rng(11))
    counts = np.bincount(picks, minlength=10)
    assert counts.sum() == 5000
    assert stats.chisquare(counts).pvalue > 0.01


def test_adaptive_threshold_keeps_n_accept_particles():
    phis = np.array([0.1, 0.2, 0.3, 0.4])
    eps = adaptive_threshold(phis, 2, 0.15)
    assert eps == 0.2
    assert np.mean(phis <= eps) == 0.5
    assert adaptive_threshold(phis, 2, 0.25) == 0.25
    assert adaptive_threshold(np.array([0.3, 0.3, 0.3, 0.9]), 1, 0.0) == 0.3


def test_adaptive_threshold_refuses_infinite_distances():
    with pytest.raises(DegenerateThresholdError):
        adaptive_threshold(np.array([0.1, np.inf, np.inf, np.inf]), 2, 0.05)
    assert adaptive_threshold(np.array([0.1, 0.2, np.inf, np.inf]), 2, 0.05) == 0.2


def test_adaptive_run_with_infinite_distances_fails_loudly():
    with pytest.raises(DegenerateThresholdError):
        adapt_re_smc(ConstantModel(np.inf), THETA, SmcConfig(particles=10, epsilon=0.1), seed=0)
