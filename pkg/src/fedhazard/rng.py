"""Deterministic random-stream derivation.

Every random draw in the package comes from a PCG64 generator keyed by a
master seed plus an integer path, via numpy's SeedSequence. Because streams
are keyed rather than consumed sequentially, user u's data does not change
when the population grows, and round r's draws do not depend on rounds
before it (which makes checkpoint resume exact).

Path layout (first element after the master seed is a stream tag):

    (seed, USER_STREAM, user_id)                per-user data generation
    (seed, PARTICIPANT_STREAM, round)           server participant sampling
    (seed, CLIENT_STREAM, round, user_id)       client mini-batch draws
"""

from __future__ import annotations

import numpy as np

USER_STREAM = 1
PARTICIPANT_STREAM = 2
CLIENT_STREAM = 3


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for the given (seed, *path) key."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, *path))))
