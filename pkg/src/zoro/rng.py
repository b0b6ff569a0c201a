"""Seeded random number generation policy.

Every source of randomness in this package flows through an explicit
64-bit seed and numpy's PCG64 bit generator.  Nothing reads or writes
numpy's global RNG state, so results are bit-reproducible across runs
and across machines with the same numpy version.

Independent streams (per repetition, per method, per dimension cell)
are derived with ``SeedSequence([master_seed, *keys])``, which is the
documented collision-resistant way to split a seed.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` and an optional stream key path."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))
