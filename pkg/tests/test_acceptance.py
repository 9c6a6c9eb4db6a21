"""Longer statistical checks of the full samplers; run with `pytest -m slow`."""

from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from src.analytics.cost_scan import ScanSettings, cost_scan, fit_cost_scaling
from src.analytics.diagnostics import loglik_qq, rmse
from src.data_generator.generate import generate_gaussian_observations
from src.models.epidemic import EpidemicModel, generate_sir_removals, gillespie_simulate, summarize_epidemic_trace
from src.models.gaussian import GaussianModel, exact_gaussian_mh
from src.pipeline.ingest import read_removal_data
from src.samplers.pmmh import ChainConfig, PmmhConfig, ProposalConfig, re_abc
from src.samplers.re_smc import SmcConfig, ThresholdSchedule, adapt_re_smc, fixed_re_smc, schedule_from_pilot
from src.samplers.slice import SliceConfig, slice_update
from src.samplers.streams import generator
from tests.conftest import BoxModel

REPO = Path(__file__).resolve().parents[1]
THETA = np.array([0.5])

pytestmark = pytest.mark.slow


def _chain(theta, iterations, cov, early_termination=True):
    return ChainConfig(
        initial_theta=np.atleast_1d(np.asarray(theta, dtype=float)),
        iterations=iterations,
        proposal=ProposalConfig(np.atleast_2d(np.asarray(cov, dtype=float))),
        early_termination=early_termination,
    )


@pytest.fixture(scope="module")
def gaussian_full():
    return GaussianModel(generate_gaussian_observations())


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def test_fixed_estimator_is_unbiased():
    model = BoxModel(2)
    schedule = ThresholdSchedule((0.4, 0.2, 0.1))
    cfg = SmcConfig(particles=500, epsilon=0.1)
    values = np.array([fixed_re_smc(model, THETA, schedule, cfg, seed=r).estimate.value for r in range(2000)])
    se = values.std(ddof=1) / np.sqrt(values.size)
    assert abs(values.mean() - 0.04) < 3 * se


def test_fixed_estimator_beats_plain_monte_carlo_on_a_rare_event(first_coordinate_model):
    probability = 1e-4
    schedule = ThresholdSchedule((1e-1, 1e-2, 1e-3, 1e-4))
    cfg = SmcConfig(particles=100, epsilon=probability)
    results = [fixed_re_smc(first_coordinate_model, THETA, schedule, cfg, seed=r) for r in range(300)]
    values = np.array([r.estimate.value for r in results])
    calls = np.mean([r.simulator_calls for r in results])
    smc_relative_variance = values.var(ddof=1) / probability ** 2
    # Binomial(calls, p) / calls
    monte_carlo_relative_variance = (1.0 - probability) / (probability * calls)
    assert smc_relative_variance < monte_carlo_relative_variance


def test_adaptive_bias_does_not_grow_with_particles():
    model = BoxModel(2)
    bias, se = {}, {}
    for n in (100, 200, 400):
        cfg = SmcConfig(particles=n, epsilon=0.1)
        values = np.array([adapt_re_smc(model, THETA, cfg, seed=10_000 * n + r).estimate.value for r in range(1000)])
        bias[n] = abs(values.mean() - 0.04)
        se[n] = values.std(ddof=1) / np.sqrt(values.size)
    assert bias[200] <= bias[100] + 2 * np.hypot(se[100], se[200])
    assert bias[400] <= bias[200] + 2 * np.hypot(se[200], se[400])


def test_slice_sampler_is_uniform_on_a_band():
    band = lambda x: abs(float(x[0]) - 0.5)  # noqa: E731
    rng = np.random.default_rng(7)
    x = np.array([0.5, 0.5])
    kept = []
    for i in range(100_000):
        x = slice_update(x, band, 0.25, SliceConfig(), rng).new_point
        if i % 10 == 0:
            kept.append(x[0])
    counts, _ = np.histogram(kept, bins=10, range=(0.25, 0.75))
    assert counts.sum() == len(kept)
    assert stats.chisquare(counts).pvalue > 0.01


def test_sellke_final_sizes_match_gillespie():
    n, lam, gamma = 10, 2.0, 1.0
    model = EpidemicModel("markov", generate_sir_removals(n, lam, gamma, seed=0))
    theta = np.array([lam, gamma])
    sellke = [model.simulate(theta, generator(1, i).random(2 * n - 1)).final_size for i in range(10_000)]
    gillespie = [gillespie_simulate(n, lam, gamma, generator(2, i)).final_size for i in range(10_000)]
    table = np.array([np.bincount(sellke, minlength=n + 1)[1:], np.bincount(gillespie, minlength=n + 1)[1:]])
    table = table[:, table.sum(axis=0) >= 10]
    assert stats.chi2_contingency(table).pvalue > 0.01


def test_log_estimates_are_normal_at_adequate_particle_counts(gaussian_full):
    model = gaussian_full.subset(5)
    theta = np.array([3.0])
    n = 400
    schedule = schedule_from_pilot(adapt_re_smc(model, theta, SmcConfig(particles=n, epsilon=1.0), seed=3))
    adequate = [
        fixed_re_smc(model, theta, schedule, SmcConfig(n, 1.0), seed=100 + r).estimate.log_value for r in range(200)
    ]
    small = [
        fixed_re_smc(model, theta, schedule, SmcConfig(n // 8, 1.0), seed=500 + r).estimate.log_value
        for r in range(200)
    ]
    qq = loglik_qq(adequate)
    assert qq.zero_count == 0
    assert qq.correlation > 0.98
    small_qq = loglik_qq(small)
    assert small_qq.zero_count > 0 or small_qq.correlation < qq.correlation


# ---------------------------------------------------------------------------
# Chains
# ---------------------------------------------------------------------------

def test_early_termination_keeps_the_accept_sequence(gaussian_full):
    model = gaussian_full.subset(5)
    smc = SmcConfig(particles=50, epsilon=2.0)
    on, off = (
        re_abc(model, PmmhConfig(chain=_chain(3.0, 200, 1.0, early_termination=flag), smc=smc), seed=9)
        for flag in (True, False)
    )
    np.testing.assert_array_equal(on.accepted, off.accepted)
    np.testing.assert_array_equal(on.thetas, off.thetas)


def test_gaussian_posterior_accuracy(gaussian_full):
    exact = exact_gaussian_mh(gaussian_full.y_obs, _chain(3.0, 10_000, 0.5), seed=1, model=gaussian_full)
    exact_mean = exact.thetas[1000:, 0].mean()

    errors = {}
    for epsilon in (5.0, 15.0, 25.0):
        theta = np.array([exact_mean])
        schedule = schedule_from_pilot(adapt_re_smc(gaussian_full, theta, SmcConfig(200, epsilon), seed=2))
        config = PmmhConfig(chain=_chain(exact_mean, 2000, 0.5), smc=SmcConfig(100, epsilon), schedule=schedule)
        sigma = re_abc(gaussian_full, config, seed=3).thetas[200:, 0]
        errors[epsilon] = rmse(sigma, 3.0)
        if epsilon == 5.0:
            assert sigma.mean() == pytest.approx(exact_mean, abs=0.3)
    assert errors[5.0] < errors[15.0] < errors[25.0]


def test_cost_scaling(gaussian_full):
    settings = ScanSettings(
        epsilons=(2.0, 1.0, 0.5, 0.25),
        dims=(3,),
        theta=3.0,
        methods=("abc-reject", "re-abc"),
        iterations=300,
        particles=50,
        accepts=50,
        stage_replicates=5,
    )
    rows = cost_scan(gaussian_full, settings, seed=6)
    fit = fit_cost_scaling(rows)
    assert fit.rejection_slopes[3] == pytest.approx(3.0, rel=0.3)
    slope, r2 = fit.stage_fits[3]
    assert slope > 0
    assert r2 > 0.9

    def growth(method):
        column = rows.filter(rows["method"] == method).sort("epsilon")["calls_per_effective_sample"]
        return column[0] / column[-1]

    assert growth("re-abc") < growth("abc-reject")


def test_synthetic_epidemic_posterior_covers_the_truth():
    lam, gamma = 2.0, 1.0
    data = generate_sir_removals(50, lam, gamma, seed=4, min_removals=10)
    model = EpidemicModel("markov", data)
    chain = _chain([lam, gamma], 400, np.diag([0.04, 0.01]))
    trace = re_abc(model, PmmhConfig(chain=chain, smc=SmcConfig(particles=50, epsilon=10.0)), seed=5)
    kept = trace.thetas[100:]
    for j, truth in enumerate((lam, gamma)):
        assert abs(kept[:, j].mean() - truth) < 3 * kept[:, j].std(ddof=1) + 1e-9


@pytest.mark.abakaliki
def test_abakaliki_gamma_infectious_posterior():
    model = EpidemicModel("gamma-infectious", read_removal_data(REPO / "data" / "abakaliki.txt"))
    theta = np.array([0.09, 0.15, 2.0])
    schedule = schedule_from_pilot(adapt_re_smc(model, theta, SmcConfig(300, 15.0, workers=4), seed=6))
    config = PmmhConfig(
        chain=_chain(theta, 500, np.diag([0.0004, 0.0025, 1.0])),
        smc=SmcConfig(300, 15.0, workers=4),
        schedule=schedule,
    )
    trace = re_abc(model, config, seed=7)
    posterior = summarize_epidemic_trace(model.variant, trace.thetas[50:])
    assert 0.9 <= posterior["r0"][0] <= 1.5
    assert 8.0 <= posterior["infectious_mean"][0] <= 20.0
