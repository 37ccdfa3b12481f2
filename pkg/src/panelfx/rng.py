"""Counter-based random number generation.

All stochastic routines in the package draw from Philox4x64-10, a
counter-based generator, seeded through ``numpy.random.SeedSequence``.
Independent sub-streams (multi-start clustering, Monte Carlo
replications, bootstrap draws, weight redraws) are derived with
``SeedSequence.spawn``, so results are bit-identical for a given seed
regardless of execution order or worker count.
"""

from __future__ import annotations

import numpy as np


def generator(seed: int) -> np.random.Generator:
    """Philox generator for an integer seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` independent child generators derived from ``seed``.

    Child ``i`` depends only on ``(seed, i)``, never on how many siblings
    exist or in what order they are consumed.
    """
    return [np.random.Generator(np.random.Philox(s))
            for s in np.random.SeedSequence(seed).spawn(n)]
