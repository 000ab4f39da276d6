"""
Random streams for gsn-shaper

Every stochastic routine takes an explicit generator. Streams are
counter-based (Philox) and keyed by (seed, *counters), so a stream's
draws never depend on what other streams consumed before it.
"""
from __future__ import annotations
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def make_rng(seed: int, *counters: int) -> np.random.Generator:
    """Independent generator for the stream identified by (seed, *counters)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, counters)])))


def as_rng(source: SeedLike) -> np.random.Generator:
    """Accept a seed, a SeedSequence or an existing generator."""
    if isinstance(source, np.random.Generator):
        return source
    if isinstance(source, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(source))
    return make_rng(source)


def split(source: SeedLike, count: int) -> list[np.random.Generator]:
    """Derive `count` independent child streams."""
    if isinstance(source, np.random.Generator):
        seeds = source.bit_generator.seed_seq.spawn(count)
    elif isinstance(source, np.random.SeedSequence):
        seeds = source.spawn(count)
    else:
        seeds = np.random.SeedSequence(int(source)).spawn(count)
    return [np.random.Generator(np.random.Philox(s)) for s in seeds]
