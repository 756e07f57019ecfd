"""Splittable, counter-based random streams.

Every random draw in the package goes through :func:`stream`, which keys a
Philox generator on ``(master seed, *path)``.  Two calls with the same key give
bit-identical streams no matter the order or the process they run in, which is
what makes replicate ensembles reproducible under parallel execution.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def split(seed, *key: int) -> np.random.SeedSequence:
    """Child seed sequence for ``key`` below ``seed`` (an int or a SeedSequence)."""
    if isinstance(seed, np.random.SeedSequence):
        entropy, base = seed.entropy, tuple(seed.spawn_key)
    else:
        entropy, base = check_seed(seed), ()
    return np.random.SeedSequence(entropy, spawn_key=base + tuple(int(k) for k in key))


def stream(seed, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(split(seed, *key)))
