"""Seeded random streams.

All stochastic routines take an explicit ``numpy.random.Generator``. Streams are
backed by Philox, a counter-based generator, so child streams derived with
:func:`spawn` are independent and replayable from the parent seed alone.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int | np.random.SeedSequence | None = 0) -> np.random.Generator:
    """Return a Philox-backed generator for ``seed``."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child streams from ``rng``.

    Children are derived from the parent's seed sequence, so the parent state is
    not consumed; spawning twice from the same parent yields new children each time.
    """
    seq = rng.bit_generator.seed_seq
    return [stream(child) for child in seq.spawn(n)]


def coerce(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(rng)
