"""Keyed random streams.

Every stream is a Philox (counter-based) generator whose key is derived from
``(master seed, *path)``, so a replicate's draws depend only on its index and
never on which worker ran it or in what order.
"""
from __future__ import annotations

import secrets

import numpy as np

__all__ = ["stream", "fresh_seed", "standard_gamma"]


def stream(seed: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def fresh_seed() -> int:
    return secrets.randbits(63)


def standard_gamma(rng: np.random.Generator, shape, size=None) -> np.ndarray:
    """Unit-scale gamma variates.

    numpy's Marsaglia-Tsang sampler covers shape >= 1; smaller shapes use
    the boost ``G(k) = G(k + 1) * U ** (1 / k)``.
    """
    shape = np.asarray(shape, dtype=float)
    if size is None:
        size = shape.shape
    small = shape < 1.0
    if not np.any(small):
        return rng.standard_gamma(shape, size=size)
    boosted = np.where(small, shape + 1.0, shape)
    g = rng.standard_gamma(boosted, size=size)
    u = rng.random(size=size)
    return np.where(small, g * u ** (1.0 / np.where(small, shape, 1.0)), g)
