"""
Shrinkage slice sampling on [0, 1]^m with invariant distribution uniform on
{x : phi(x) <= eps}.

A random direction v ~ N(0, I) is bracketed by [-u, w - u], u ~ U(0, w). Proposals
x' = reflect(x + z v) are drawn from the bracket, which shrinks toward z = 0 after each
rejection, so x itself always stays reachable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from src.contracts.errors import SliceSamplingError
from src.contracts.schemas import SLICE_INITIAL_WIDTH, SLICE_MAX_ITERATIONS, SLICE_MIN_WIDTH
from src.models.core import within_threshold


@dataclass(frozen=True)
class SliceConfig:
    width: float = SLICE_INITIAL_WIDTH
    max_iterations: int = SLICE_MAX_ITERATIONS

    def __post_init__(self) -> None:
        if not (0.0 < self.width <= 1.0):
            raise ValueError(f"slice width must lie in (0, 1], got {self.width}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class SliceOutcome:
    new_point: np.ndarray
    final_abs_z: float
    iterations_used: int
    phi_value: float


def reflect(y):
    """Reflect into [0, 1]: m = y mod 2, returns m if m < 1 else 2 - m."""
    m = np.mod(np.asarray(y, dtype=float), 2.0)
    out = np.where(m < 1.0, m, 2.0 - m)
    return out if out.ndim else float(out)


def slice_update(
    x: np.ndarray,
    phi: Callable[[np.ndarray], float],
    epsilon: float,
    config: SliceConfig,
    rng: np.random.Generator,
    current_phi: Optional[float] = None,
) -> SliceOutcome:
    """
    One slice update of x within {phi <= epsilon}.

    current_phi, when supplied, is trusted as phi(x) and saves one evaluation.
    Raises ValueError if x is outside the slice and SliceSamplingError if
    max_iterations proposals are all rejected.
    """
    x = np.asarray(x, dtype=float)
    if current_phi is None:
        current_phi = phi(x)
    if not within_threshold(current_phi, epsilon):
        raise ValueError(f"slice_update called outside the slice: phi(x)={current_phi} > eps={epsilon}")

    w = config.width
    v = rng.standard_normal(x.size)
    u = rng.uniform(0.0, w)
    a, b = -u, w - u

    for iteration in range(1, config.max_iterations + 1):
        z = rng.uniform(a, b)
        proposal = reflect(x + z * v)
        value = phi(proposal)
        if within_threshold(value, epsilon):
            return SliceOutcome(
                new_point=np.asarray(proposal, dtype=float),
                final_abs_z=abs(z),
                iterations_used=iteration,
                phi_value=float(value),
            )
        if z < 0:
            a = z
        else:
            b = z

    raise SliceSamplingError(
        f"slice_update hit {config.max_iterations} iterations at eps={epsilon}; "
        "phi is probably not deterministic in x"
    )


def adapt_width(max_abs_z: float) -> float:
    """Search width for the next SMC iteration: min(1, 2 * z_bar), floored at SLICE_MIN_WIDTH."""
    if max_abs_z < 0 or np.isnan(max_abs_z):
        raise ValueError(f"max |z| must be nonnegative, got {max_abs_z}")
    return float(max(SLICE_MIN_WIDTH, min(1.0, 2.0 * max_abs_z)))
