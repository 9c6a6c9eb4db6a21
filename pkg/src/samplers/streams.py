"""
Deterministic random streams and the per-particle worker map.

Every random draw in the engine comes from a Generator seeded by a SeedSequence whose
spawn key names where the draw happens, e.g. (stage, particle) inside RE-SMC or
(iteration,) inside a chain. Results therefore do not depend on the worker count or
on how much work an earlier early-terminated call skipped.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]

T = TypeVar("T")
R = TypeVar("R")


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an int or SeedSequence, got {type(seed).__name__}")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.random.SeedSequence(int(seed))


def substream(seed: SeedLike, *keys: int) -> np.random.SeedSequence:
    """Child sequence identified by `keys` below `seed`."""
    base = as_seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=base.entropy,
        spawn_key=tuple(base.spawn_key) + tuple(int(k) for k in keys),
        pool_size=base.pool_size,
    )


def generator(seed: SeedLike, *keys: int) -> np.random.Generator:
    return np.random.default_rng(substream(seed, *keys))


def parallel_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], workers: int = 1) -> list[R]:
    """Ordered map; uses a thread pool when workers > 1."""
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
