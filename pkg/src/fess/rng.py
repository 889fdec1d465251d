"""Counter-based seeding helpers.

Every randomized routine in the package derives its generator from an
explicit base seed plus integer counters (replicate index, stream tag).
The derivation is a pure function of ``(seed, *keys)``, so replicates can
be generated in any order, or in parallel, with identical results.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def derived_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a Generator keyed by ``seed`` and optional counter values."""
    seed = int(seed)
    if seed < 0:
        raise ValidationError("seed must be a non-negative integer")
    entropy = [seed] + [int(k) for k in keys]
    if any(k < 0 for k in entropy):
        raise ValidationError("seed components must be non-negative")
    return np.random.default_rng(np.random.SeedSequence(entropy))
