"""Deterministic random substreams keyed by integers.

Every stochastic component draws from a stream derived from (seed, *keys),
so results are reproducible regardless of evaluation order.
"""
from __future__ import annotations

import numpy as np


def substream(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) & 0xFFFFFFFF for k in keys]))


def unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    n = np.linalg.norm(v)
    while n < 1e-12:
        v = rng.standard_normal(dim)
        n = np.linalg.norm(v)
    return v / n
