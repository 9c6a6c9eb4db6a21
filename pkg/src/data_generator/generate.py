"""
Seeded generators for the datasets the experiments share.

  - data/gaussian_obs.csv: 25 draws of N(0, 3^2), seed GAUSSIAN_DATA_SEED

Usage:
    python -m src.data_generator.generate
"""

from pathlib import Path

import numpy as np

from src.contracts.schemas import (
    GAUSSIAN_DATA_PATH,
    GAUSSIAN_DATA_SEED,
    GAUSSIAN_N_OBS,
    GAUSSIAN_TRUE_SIGMA,
)
from src.models.gaussian import gaussian_simulate
from src.samplers.streams import generator


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def generate_gaussian_observations(
    seed: int = GAUSSIAN_DATA_SEED,
    n_obs: int = GAUSSIAN_N_OBS,
    sigma: float = GAUSSIAN_TRUE_SIGMA,
) -> np.ndarray:
    """y = sigma * Phi^{-1}(x), x uniform from the seed; the same map the model simulates with."""
    x = generator(seed).random(n_obs)
    return gaussian_simulate(sigma, x)


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------

def print_summary(y: np.ndarray) -> None:
    print("\n" + "=" * 60)
    print("GAUSSIAN DATASET SUMMARY")
    print("=" * 60)
    print(f"Observations:        {y.size}")
    print(f"Mean:                {y.mean():+.4f}")
    print(f"Sample sd:           {y.std(ddof=1):.4f}")
    print(f"MLE sigma:           {np.sqrt(np.mean(y ** 2)):.4f}  (truth {GAUSSIAN_TRUE_SIGMA})")
    print("=" * 60)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(path: str = GAUSSIAN_DATA_PATH, seed: int = GAUSSIAN_DATA_SEED) -> Path:
    from src.pipeline.export import write_gaussian_observations

    print("Generating Gaussian observations...")
    y = generate_gaussian_observations(seed)
    print_summary(y)
    out = write_gaussian_observations(y, path, seed)
    print(f"\nSaved {y.size} observations -> {out}")
    return out


if __name__ == "__main__":
    main()
