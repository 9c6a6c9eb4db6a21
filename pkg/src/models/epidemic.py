"""
Stochastic SIR epidemic in a closed population, observed through removal times.

Simulation uses the Sellke construction: every individual j >= 2 carries a pressure
threshold p_j and is infected once the accumulated infection pressure
beta * integral I(t) dt reaches it; individual j stays infectious for g_j. Both come
from uniform latents through quantile(), so the simulator is deterministic in x.

Variants (theta layout in EPIDEMIC_PARAMS):
  markov / binned-markov   F_inf = Exp(gamma),      F_press = Exp(1)
  gamma-infectious         F_inf = Gamma(k, gamma), F_press = Exp(1)
  weibull-pressure         F_inf = Exp(gamma),      F_press = Weibull(k, 1)

Latent layout: x[0:n] infectious-period quantiles, x[n:2n-1] pressure quantiles of
individuals 2..n.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.contracts.schemas import (
    EPIDEMIC_PARAMS,
    EPIDEMIC_VARIANTS,
    SIR_BIN_WIDTH,
    SIR_PENALTY_K,
    SIR_PRIOR_RATE,
)
from src.models.core import Distribution, ModelSpec, quantile
from src.samplers.streams import SeedLike, generator

_GENERATE_MAX_ATTEMPTS = 1000


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpidemicVariant:
    tag: str

    def __post_init__(self) -> None:
        if self.tag not in EPIDEMIC_VARIANTS:
            raise ValueError(f"Unknown epidemic variant '{self.tag}', expected one of {EPIDEMIC_VARIANTS}")

    @property
    def params(self) -> tuple[str, ...]:
        return EPIDEMIC_PARAMS[self.tag]

    @property
    def binned(self) -> bool:
        return self.tag == "binned-markov"

    def infectious_distribution(self, theta) -> Distribution:
        gamma = float(theta[1])
        if self.tag == "gamma-infectious":
            return Distribution.gamma(shape=float(theta[2]), rate=gamma)
        return Distribution.exponential(gamma)

    def pressure_distribution(self, theta) -> Distribution:
        if self.tag == "weibull-pressure":
            return Distribution.weibull(float(theta[2]))
        return Distribution.exponential(1.0)


@dataclass(frozen=True)
class RemovalData:
    """Observed removals as times since the first removal, ascending (times[0] == 0)."""

    times: np.ndarray
    population: int

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float).reshape(-1)
        if times.size == 0:
            raise ValueError("removal data needs at least one removal")
        if np.any(np.diff(times) < 0):
            raise ValueError("removal times must be nondecreasing")
        if times[0] != 0.0:
            raise ValueError(f"first removal must be at time 0, got {times[0]}")
        if times.size > self.population:
            raise ValueError(f"{times.size} removals exceed population {self.population}")
        object.__setattr__(self, "times", times)

    @property
    def removed(self) -> int:
        return int(self.times.size)

    @classmethod
    def from_inter_removal_times(cls, population: int, gaps) -> "RemovalData":
        gaps = np.asarray(gaps, dtype=float).reshape(-1)
        if np.any(gaps < 0) or np.any(~np.isfinite(gaps)):
            raise ValueError("inter-removal times must be finite and nonnegative")
        return cls(times=np.concatenate([[0.0], np.cumsum(gaps)]), population=int(population))

    @classmethod
    def from_removal_times(cls, population: int, removal_times) -> "RemovalData":
        r = np.sort(np.asarray(removal_times, dtype=float))
        r = r[np.isfinite(r)]
        if r.size == 0:
            raise ValueError("no finite removal times")
        return cls(times=r - r[0], population=int(population))

    def inter_removal_times(self) -> np.ndarray:
        return np.diff(self.times)


@dataclass(frozen=True)
class SimulatedEpidemic:
    removal_times: np.ndarray          # length n, +inf = never infected
    thresholds: np.ndarray             # ascending, leading 0 for individual 1
    total_pressure: float
    beta: float

    @property
    def population(self) -> int:
        return int(self.removal_times.size)

    @property
    def final_size(self) -> int:
        return int(np.isfinite(self.removal_times).sum())

    def times_since_first_removal(self) -> np.ndarray:
        r = np.sort(self.removal_times[np.isfinite(self.removal_times)])
        return r - r[0]


@dataclass(frozen=True)
class GillespieOutcome:
    final_size: int
    removal_times: np.ndarray          # ascending, removed individuals only


# ---------------------------------------------------------------------------
# Simulators
# ---------------------------------------------------------------------------

def sellke_simulate(n: int, beta: float, g, p, debug: bool = False) -> SimulatedEpidemic:
    """
    Sellke construction. Individual 1 is infected at time 0 and removed at g[0];
    p holds the thresholds of individuals 2..n.

    Infections happen in ascending threshold order, so a pointer into the sorted
    thresholds replaces the search for the next one.
    """
    g = np.asarray(g, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float).reshape(-1)
    if g.size != n or p.size != n - 1:
        raise ValueError(f"expected {n} infectious periods and {n - 1} thresholds, got {g.size} and {p.size}")
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")

    order = np.argsort(p, kind="stable")
    sorted_p = p[order]
    removal = np.full(n, np.inf)
    removal[0] = g[0]
    removals = [(g[0], 0)]
    infected_sum = g[0]

    t = 0.0
    pressure = 0.0
    infectives = 1
    a = 0

    while infectives > 0:
        r_b = removals[0][0]
        reached = pressure + beta * infectives * (r_b - t)
        if a < n - 1 and sorted_p[a] < reached:
            t_next = t + (sorted_p[a] - pressure) / (beta * infectives)
            pressure_next = sorted_p[a]
            j = int(order[a]) + 1
            removal[j] = t_next + g[j]
            heapq.heappush(removals, (removal[j], j))
            infected_sum += g[j]
            infectives += 1
            a += 1
        else:
            heapq.heappop(removals)
            t_next, pressure_next = r_b, reached
            infectives -= 1
        if debug:
            assert t_next >= t and pressure_next >= pressure, "Sellke pressure or time decreased"
        t, pressure = t_next, pressure_next

    if debug:
        assert np.isclose(pressure, beta * infected_sum), "total pressure differs from beta * sum(g)"

    return SimulatedEpidemic(
        removal_times=removal,
        thresholds=np.concatenate([[0.0], sorted_p]),
        total_pressure=float(pressure),
        beta=float(beta),
    )


def gillespie_simulate(n: int, lam: float, gamma: float, rng: np.random.Generator) -> GillespieOutcome:
    """Event-driven Markov SIR: infection rate lam/n * S * I, removal rate gamma * I."""
    if lam < 0 or not gamma > 0:
        raise ValueError(f"need lam >= 0 and gamma > 0, got lam={lam}, gamma={gamma}")
    susceptible, infectives = n - 1, 1
    t = 0.0
    removals: list[float] = []
    while infectives > 0:
        infection_rate = lam / n * susceptible * infectives
        removal_rate = gamma * infectives
        total = infection_rate + removal_rate
        t += rng.exponential(1.0 / total)
        if rng.uniform() * total < infection_rate:
            susceptible -= 1
            infectives += 1
        else:
            infectives -= 1
            removals.append(t)
    return GillespieOutcome(final_size=n - susceptible, removal_times=np.asarray(removals))


# ---------------------------------------------------------------------------
# Distance
# ---------------------------------------------------------------------------

def bin_floor5(s):
    """Greatest multiple of the bin width (5 days) not above s."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("bin_floor5 expects nonnegative times")
    out = SIR_BIN_WIDTH * np.floor(s / SIR_BIN_WIDTH)
    return out if out.ndim else float(out)


def sir_distance(
    sim: SimulatedEpidemic,
    obs: RemovalData,
    k_penalty: float = SIR_PENALTY_K,
    binned: bool = False,
) -> float:
    """
    Euclidean distance on matched removal times plus a penalty per unmatched removal:
    k + rho_bar - rho_(i) for each extra simulated removal, k + rho_(i) for each
    missing one, with rho_(i) the i-th smallest simulated threshold.
    """
    if sim.population != obs.population:
        raise ValueError(f"simulated population {sim.population} != observed {obs.population}")
    s_sim = sim.times_since_first_removal()
    s_obs = obs.times
    nu, nu_obs = s_sim.size, s_obs.size
    m = min(nu, nu_obs)

    a, b = s_obs[:m], s_sim[:m]
    if binned:
        a, b = bin_floor5(a), bin_floor5(b)
    distance = float(np.sqrt(np.sum((a - b) ** 2)))

    rho = sim.thresholds
    if nu > nu_obs:
        distance += float(np.sum(k_penalty + sim.total_pressure - rho[nu_obs:nu]))
    elif nu < nu_obs:
        distance += float(np.sum(k_penalty + rho[nu:nu_obs]))
    return distance


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

def r0(variant: EpidemicVariant, theta) -> Optional[float]:
    """Basic reproduction number lam * E(F_inf); None for Weibull pressure, where it is undefined."""
    if variant.tag == "weibull-pressure":
        return None
    lam, gamma = float(theta[0]), float(theta[1])
    if variant.tag == "gamma-infectious":
        return lam * float(theta[2]) / gamma
    return lam / gamma


def epidemic_summary(variant: EpidemicVariant, theta) -> dict[str, Optional[float]]:
    """R0, infectious-period mean/sd and pressure-threshold mean/sd (thresholds scaled by lam)."""
    lam = float(theta[0])
    f_inf = variant.infectious_distribution(theta)
    f_press = variant.pressure_distribution(theta)
    return {
        "r0": r0(variant, theta),
        "infectious_mean": f_inf.mean,
        "infectious_sd": f_inf.std,
        "pressure_mean": lam * f_press.mean,
        "pressure_sd": lam * f_press.std,
    }


def summarize_epidemic_trace(variant: EpidemicVariant, thetas) -> dict[str, tuple[float, float]]:
    """Posterior (mean, sd) of every epidemic_summary quantity over the rows of thetas."""
    rows = [epidemic_summary(variant, theta) for theta in np.atleast_2d(np.asarray(thetas, dtype=float))]
    out: dict[str, tuple[float, float]] = {}
    for key in rows[0]:
        values = np.array([row[key] for row in rows if row[key] is not None], dtype=float)
        if values.size:
            out[key] = (float(values.mean()), float(values.std(ddof=1)) if values.size > 1 else 0.0)
    return out


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

class EpidemicModel(ModelSpec):
    """SIR variant with independent Exp(0.1) priors on every parameter."""

    def __init__(self, variant, data: RemovalData, k_penalty: float = SIR_PENALTY_K) -> None:
        self.variant = variant if isinstance(variant, EpidemicVariant) else EpidemicVariant(variant)
        self.data = data
        self.k_penalty = float(k_penalty)
        self.population = data.population
        self.param_dim = len(self.variant.params)
        self.latent_dim = 2 * data.population - 1

    def prior_log_density(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if np.any(theta <= 0) or not np.all(np.isfinite(theta)):
            return -np.inf
        return float(theta.size * np.log(SIR_PRIOR_RATE) - SIR_PRIOR_RATE * theta.sum())

    def prior_sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.exponential(1.0 / SIR_PRIOR_RATE, size=self.param_dim)

    def prior_sample_batch(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.exponential(1.0 / SIR_PRIOR_RATE, size=(n, self.param_dim))

    def simulate(self, theta, x) -> SimulatedEpidemic:
        n = self.population
        x = np.asarray(x, dtype=float)
        g = quantile(self.variant.infectious_distribution(theta), x[:n])
        p = quantile(self.variant.pressure_distribution(theta), x[n:])
        return sellke_simulate(n, float(theta[0]) / n, g, p)

    def phi(self, theta: np.ndarray, x: np.ndarray) -> float:
        sim = self.simulate(theta, x)
        return sir_distance(sim, self.data, self.k_penalty, binned=self.variant.binned)


def generate_sir_removals(
    n: int,
    lam: float,
    gamma: float,
    seed: SeedLike,
    min_removals: int = 2,
) -> RemovalData:
    """
    Synthetic Markov SIR removal data from the Sellke simulator.

    Outbreaks with fewer than min_removals removals are redrawn from the next stream.
    """
    variant = EpidemicVariant("markov")
    theta = (lam, gamma)
    for attempt in range(_GENERATE_MAX_ATTEMPTS):
        x = generator(seed, attempt).random(2 * n - 1)
        g = quantile(variant.infectious_distribution(theta), x[:n])
        p = quantile(variant.pressure_distribution(theta), x[n:])
        sim = sellke_simulate(n, lam / n, g, p)
        if sim.final_size >= min_removals:
            return RemovalData.from_removal_times(n, sim.removal_times)
    raise ValueError(f"no outbreak with {min_removals}+ removals in {_GENERATE_MAX_ATTEMPTS} attempts")
