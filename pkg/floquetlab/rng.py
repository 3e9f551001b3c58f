"""Seeding helpers.

Every stochastic entry point takes either an integer seed or a
``numpy.random.Generator``. Realizations draw from independent streams derived
from ``(seed, realization)`` so results do not depend on how work is scheduled.
"""
from typing import Optional, Union

import numpy as np

SeedLike = Union[int, np.random.Generator]


def as_generator(seed: Optional[SeedLike]) -> np.random.Generator:
    if seed is None:
        raise ValueError("a seed is required; wall-clock seeding is not supported")
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def realization_rng(seed: int, realization: int, *key: int) -> np.random.Generator:
    """Generator for one realization of an experiment.

    Parameters
    ----------
    seed : int
        Master seed of the experiment.
    realization : int
        Realization index.
    *key : int
        Optional extra spawn-key entries, e.g. to decorrelate sample families.
    """
    if seed < 0 or realization < 0:
        raise ValueError(f"seed and realization must be non-negative, got {seed}, {realization}")
    sequence = np.random.SeedSequence(seed, spawn_key=(realization,) + tuple(key))
    return np.random.default_rng(sequence)
