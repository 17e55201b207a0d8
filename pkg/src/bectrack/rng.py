"""Seeded, splittable random streams.

Every stochastic quantity in the package is drawn from a Philox
(counter-based) generator keyed by an integer seed and a stream index, so
that noise for the measurement record and phases for the initial estimate
never share a stream and can be regenerated independently.
"""

from __future__ import annotations

import numpy as np

# stream indices
NOISE = 0
ESTIMATE = 1
INITIAL = 2


def make_generator(seed: int, stream: int = NOISE) -> np.random.Generator:
    """Return the Philox generator for ``(seed, stream)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def wiener_increments(seed: int, n_steps: int, dt: float) -> np.ndarray:
    """Gaussian increments dW ~ Normal(0, dt) for one trajectory."""
    rng = make_generator(seed, NOISE)
    return np.sqrt(dt) * rng.standard_normal(n_steps)
