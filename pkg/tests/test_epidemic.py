import numpy as np
import pytest

from src.models.epidemic import (
    EpidemicModel,
    EpidemicVariant,
    RemovalData,
    bin_floor5,
    epidemic_summary,
    generate_sir_removals,
    gillespie_simulate,
    r0,
    sellke_simulate,
    sir_distance,
    summarize_epidemic_trace,
)
from src.samplers.streams import generator


@pytest.fixture
def three_person_epidemic():
    # Individual 2 (threshold 1) is infected at t = 1, individual 3 (threshold 5) never is
    return sellke_simulate(3, 1.0, g=[2.0, 1.0, 1.0], p=[1.0, 5.0], debug=True)


def test_sellke_hand_trace(three_person_epidemic):
    sim = three_person_epidemic
    np.testing.assert_array_equal(sim.removal_times, [2.0, 2.0, np.inf])
    assert sim.final_size == 2
    assert sim.total_pressure == pytest.approx(3.0)
    np.testing.assert_array_equal(sim.thresholds, [0.0, 1.0, 5.0])
    np.testing.assert_array_equal(sim.times_since_first_removal(), [0.0, 0.0])


def test_sellke_total_pressure_is_beta_times_total_infectious_time():
    rng = np.random.default_rng(0)
    for _ in range(50):
        g = rng.exponential(1.0, size=10)
        p = rng.exponential(1.0, size=9)
        sim = sellke_simulate(10, 0.3, g, p, debug=True)
        infected = np.isfinite(sim.removal_times)
        assert sim.total_pressure == pytest.approx(0.3 * g[infected].sum())


def test_sellke_without_infection_pressure():
    sim = sellke_simulate(4, 0.0, g=[1.5, 1.0, 1.0, 1.0], p=[0.1, 0.2, 0.3])
    assert sim.final_size == 1
    assert sim.removal_times[0] == 1.5


def test_sellke_argument_checks():
    with pytest.raises(ValueError):
        sellke_simulate(3, 1.0, g=[1.0, 1.0], p=[1.0, 1.0])
    with pytest.raises(ValueError):
        sellke_simulate(3, -1.0, g=[1.0, 1.0, 1.0], p=[1.0, 1.0])


def test_sellke_and_gillespie_final_sizes_agree():
    n, lam, gamma = 20, 1.5, 1.0
    variant = EpidemicVariant("markov")
    theta = (lam, gamma)
    model = EpidemicModel(variant, RemovalData(np.zeros(1), n))
    sellke = np.array([model.simulate(theta, generator(5, i).random(2 * n - 1)).final_size for i in range(2000)])
    gillespie = np.array([gillespie_simulate(n, lam, gamma, generator(6, i)).final_size for i in range(2000)])
    assert sellke.mean() == pytest.approx(gillespie.mean(), abs=1.0)
    assert np.mean(sellke <= 3) == pytest.approx(np.mean(gillespie <= 3), abs=0.05)


def test_gillespie_without_infection_stops_at_the_index_case():
    for i in range(20):
        outcome = gillespie_simulate(15, 0.0, 1.0, generator(8, i))
        assert outcome.final_size == 1
        assert outcome.removal_times.shape == (1,)


def _perturbed_three_person_epidemic(delta):
    # Individual 2 is infected at 1 + delta and removed at 2; individual 1 is removed at 2 + delta
    return sellke_simulate(3, 1.0, g=[2.0 + delta, 1.0 - delta, 1.0], p=[1.0 + delta, 5.0 + delta])


@pytest.mark.parametrize(
    "times, change",
    [
        (np.array([0.0, 0.0]), lambda delta: delta),
        (np.array([0.0]), lambda delta: -delta),
    ],
    ids=["matched", "extra-removal"],
)
def test_distance_changes_by_order_delta(times, change):
    obs = RemovalData(times, population=3)
    base = sir_distance(_perturbed_three_person_epidemic(0.0), obs)
    for delta in (1e-2, 1e-4, 1e-6):
        moved = sir_distance(_perturbed_three_person_epidemic(delta), obs)
        assert moved - base == pytest.approx(change(delta), rel=1e-4)


def test_distance_penalises_missing_removals(three_person_epidemic):
    obs = RemovalData(np.array([0.0, 1.0, 3.0]), population=3)
    # matched part sqrt(0 + 1), plus k + rho_(3) for the one missing removal
    assert sir_distance(three_person_epidemic, obs) == pytest.approx(1.0 + 1000.0 + 5.0)


def test_distance_penalises_extra_removals(three_person_epidemic):
    obs = RemovalData(np.array([0.0]), population=3)
    # one extra simulated removal: k + total pressure - rho_(2)
    assert sir_distance(three_person_epidemic, obs, k_penalty=1000.0) == pytest.approx(1000.0 + 3.0 - 1.0)


def test_distance_is_zero_for_matching_removals(three_person_epidemic):
    obs = RemovalData(np.array([0.0, 0.0]), population=3)
    assert sir_distance(three_person_epidemic, obs) == 0.0


def test_distance_requires_matching_population(three_person_epidemic):
    with pytest.raises(ValueError):
        sir_distance(three_person_epidemic, RemovalData(np.array([0.0]), population=4))


def test_binned_distance_compares_five_day_bins():
    sim = sellke_simulate(2, 1.0, g=[1.0, 6.0], p=[0.5])
    # removals at 1 and 6.5 -> times since first removal (0, 5.5)
    obs = RemovalData(np.array([0.0, 7.0]), population=2)
    assert sir_distance(sim, obs, binned=True) == 0.0
    assert sir_distance(sim, obs) == pytest.approx(1.5)


def test_bin_floor5():
    assert bin_floor5(7.5) == 5.0
    assert bin_floor5(4.99) == 0.0
    assert bin_floor5(10.0) == 10.0
    with pytest.raises(ValueError):
        bin_floor5(-1.0)


def test_removal_data_validation():
    data = RemovalData.from_inter_removal_times(10, [1.0, 2.0])
    np.testing.assert_array_equal(data.times, [0.0, 1.0, 3.0])
    np.testing.assert_array_equal(data.inter_removal_times(), [1.0, 2.0])
    with pytest.raises(ValueError):
        RemovalData(np.array([1.0, 2.0]), population=10)
    with pytest.raises(ValueError):
        RemovalData(np.array([0.0, 2.0, 1.0]), population=10)
    with pytest.raises(ValueError):
        RemovalData(np.zeros(3), population=2)
    with pytest.raises(ValueError):
        RemovalData.from_inter_removal_times(10, [-1.0])


def test_variants_map_parameters_to_distributions():
    gamma_variant = EpidemicVariant("gamma-infectious")
    f_inf = gamma_variant.infectious_distribution((1.0, 0.5, 3.0))
    assert (f_inf.kind, f_inf.shape, f_inf.rate) == ("gamma", 3.0, 0.5)
    weibull = EpidemicVariant("weibull-pressure").pressure_distribution((1.0, 0.5, 2.0))
    assert (weibull.kind, weibull.shape) == ("weibull", 2.0)
    assert EpidemicVariant("binned-markov").binned
    with pytest.raises(ValueError):
        EpidemicVariant("seir")


def test_basic_reproduction_number():
    assert r0(EpidemicVariant("markov"), (1.5, 0.5)) == pytest.approx(3.0)
    assert r0(EpidemicVariant("gamma-infectious"), (0.1, 0.2, 4.0)) == pytest.approx(2.0)
    assert r0(EpidemicVariant("weibull-pressure"), (1.0, 1.0, 2.0)) is None


def test_epidemic_summary_and_trace_summary():
    summary = epidemic_summary(EpidemicVariant("markov"), (2.0, 0.5))
    assert summary["infectious_mean"] == pytest.approx(2.0)
    assert summary["pressure_mean"] == pytest.approx(2.0)
    posterior = summarize_epidemic_trace(EpidemicVariant("weibull-pressure"), [[1.0, 1.0, 2.0], [1.0, 2.0, 2.0]])
    assert "r0" not in posterior
    assert posterior["infectious_mean"][0] == pytest.approx(0.75)


def test_epidemic_model_layout_and_prior():
    data = RemovalData(np.array([0.0, 1.0, 4.0]), population=6)
    model = EpidemicModel("gamma-infectious", data)
    assert model.param_dim == 3
    assert model.latent_dim == 11
    assert model.prior_log_density(np.array([1.0, 1.0, 1.0])) == pytest.approx(3 * np.log(0.1) - 0.3)
    assert model.prior_log_density(np.array([1.0, 0.0, 1.0])) == -np.inf
    x = np.random.default_rng(4).random(11)
    assert model.phi(np.array([1.0, 0.5, 2.0]), x) == model.phi(np.array([1.0, 0.5, 2.0]), x)


def test_generated_removals_have_enough_cases():
    data = generate_sir_removals(30, 2.0, 1.0, seed=8, min_removals=5)
    assert data.population == 30
    assert data.removed >= 5
    assert data.times[0] == 0.0
