"""Counter-based random streams.

Every stochastic quantity in the package is drawn from a Philox generator
keyed by a root seed plus an integer path (group, draw, user, ...).  Streams
with distinct paths are statistically independent and reproducible no matter
how draws are batched or distributed over threads.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for the given root seed and integer path."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Draw iid CN(0, 1) samples: unit-variance circularly symmetric Gaussian."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)
