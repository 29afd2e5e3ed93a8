"""Seedable, splittable random streams.

Every stochastic routine in the package derives its generator from a master
seed plus an integer path, e.g. ``substream(seed, trial)`` or
``substream(seed, trial, stage)``. Streams for distinct paths are
statistically independent, so trials can run in parallel and still reproduce
the serial results bit for bit. Philox is counter-based, which keeps the
stream independent of how many draws earlier substreams made.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "sign_probes"]


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Return the generator for ``(master_seed, *path)``.

    The same arguments always yield the same stream; different paths yield
    independent streams.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def sign_probes(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    """Rademacher +-1 probe matrix of shape (size, count)."""
    return (rng.integers(0, 2, size=(size, count)) * 2 - 1).astype(np.float64)
