"""Seeded generator helpers.

All randomness flows through numpy's PCG64 bit generator
(``numpy.random.default_rng``). Independent trials use the stream
``default_rng(base_seed + trial_index)`` so any single trial can be replayed.
"""

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def trial_rng(base_seed: int, trial_index: int) -> np.random.Generator:
    """Generator for trial ``trial_index`` of a run seeded with ``base_seed``"""
    return np.random.default_rng(base_seed + trial_index)


def sample_index(rng: np.random.Generator, dist: np.ndarray, size: int) -> np.ndarray:
    """Draw ``size`` indices from a probability vector by inverse-CDF lookup"""
    cdf = np.cumsum(dist)
    draws = rng.random(size) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, draws, side="right"), len(dist) - 1)
