"""Seeded random streams.

Every stochastic operation in the package takes an explicit
``numpy.random.Generator``. Streams are derived from a master seed with a
counter path, so the stream for ``(cell, block)`` never depends on how many
other cells or blocks exist::

    stream(seed, 3, 17)  ==  Generator(PCG64(SeedSequence(seed, spawn_key=(3, 17))))
"""

from __future__ import annotations

import numpy as np

Rng = np.random.Generator


def stream(seed: int, *path: int) -> Rng:
    """Counter-based child stream of ``seed`` addressed by ``path``."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(seq))


def as_rng(rng: Rng | int | None) -> Rng:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
