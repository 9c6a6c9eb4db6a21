"""Toy models with closed-form likelihoods, shared by the sampler tests."""

from __future__ import annotations

import numpy as np
import pytest

from src.models.core import ModelSpec
from src.models.gaussian import GaussianModel


class _UnitPrior(ModelSpec):
    param_dim = 1

    def prior_log_density(self, theta: np.ndarray) -> float:
        value = float(np.asarray(theta).reshape(-1)[0])
        return 0.0 if 0.0 < value < 1.0 else -np.inf

    def prior_sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([rng.uniform()])


class BoxModel(_UnitPrior):
    """phi = max_i |x_i - 0.5|, so Pr(phi <= eps) = (2 eps)^m for eps <= 0.5."""

    def __init__(self, latent_dim: int = 3) -> None:
        self.latent_dim = latent_dim

    def phi(self, theta: np.ndarray, x: np.ndarray) -> float:
        return float(np.max(np.abs(np.asarray(x) - 0.5)))

    @staticmethod
    def probability(epsilon: float, latent_dim: int) -> float:
        return min(1.0, 2.0 * epsilon) ** latent_dim


class ZeroModel(_UnitPrior):
    """phi identically 0."""

    latent_dim = 2

    def phi(self, theta: np.ndarray, x: np.ndarray) -> float:
        return 0.0


class FirstCoordinateModel(_UnitPrior):
    """phi = x_1, so Pr(phi <= eps) = eps on [0, 1]."""

    latent_dim = 2

    def phi(self, theta: np.ndarray, x: np.ndarray) -> float:
        return float(np.asarray(x)[0])


class ConstantModel(_UnitPrior):
    """phi identically `value`."""

    latent_dim = 1

    def __init__(self, value: float) -> None:
        self.value = value

    def phi(self, theta: np.ndarray, x: np.ndarray) -> float:
        return self.value


@pytest.fixture
def box_model() -> BoxModel:
    return BoxModel(3)


@pytest.fixture
def zero_model() -> ZeroModel:
    return ZeroModel()


@pytest.fixture
def first_coordinate_model() -> FirstCoordinateModel:
    return FirstCoordinateModel()


@pytest.fixture
def small_gaussian() -> GaussianModel:
    return GaussianModel(np.array([1.0, -2.0, 3.5]))


@pytest.fixture
def gaussian_ini(tmp_path):
    """Writes an observations CSV plus an INI file built from the given sections; returns its path."""
    from src.pipeline.export import write_gaussian_observations

    data = write_gaussian_observations([1.0, -2.0, 3.5, 0.5], tmp_path / "obs.csv", seed=0)

    def _write(sections: dict[str, dict[str, object]], name: str = "run.ini"):
        lines = []
        for section, values in sections.items():
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {value}" for key, value in values.items())
            lines.append("")
        if "model" not in sections:
            lines.extend(["[model]", f"data = {data.name}", ""])
        path = tmp_path / name
        path.write_text("\n".join(lines), encoding="utf-8")
        return path

    return _write
