"""Seedable, splittable random streams.

Every stochastic routine takes either a plain integer seed or a
``numpy.random.SeedSequence``.  Sub-streams are derived by appending integer
keys to the spawn key, so a replication's stream depends only on
``(seed, *keys)`` and never on scheduling order.
"""

from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def derive(seed: SeedLike, *keys: int) -> np.random.SeedSequence:
    """Deterministic child ``SeedSequence`` for ``(seed, *keys)``."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy,
                                      spawn_key=tuple(seed.spawn_key) + tuple(keys))
    if int(seed) < 0:
        raise ValueError("seed must be a non-negative integer")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))


def make_rng(seed: SeedLike, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive(seed, *keys)))
