"""Deterministic seed derivation.

Every random draw in the package flows through a generator derived from the
experiment master seed plus a role tag and coordinates such as (round, client).
Results are therefore independent of execution order and parallelism degree.
"""

from __future__ import annotations

import numpy as np

# Role tags keep unrelated streams from colliding on equal coordinates.
ROLE_INIT = 1
ROLE_DATASET = 2
ROLE_PARTITION = 3
ROLE_SAMPLING = 4
ROLE_SERVER = 5
ROLE_CLIENT = 6


def derive_seed(master_seed: int, *parts: int) -> int:
    """Collapse (master_seed, *parts) into a single reproducible integer seed."""
    seq = np.random.SeedSequence([int(master_seed), *[int(p) for p in parts]])
    return int(seq.generate_state(1)[0])


def derive_rng(master_seed: int, *parts: int) -> np.random.Generator:
    """Generator seeded from (master_seed, *parts)."""
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), *[int(p) for p in parts]])
    )
