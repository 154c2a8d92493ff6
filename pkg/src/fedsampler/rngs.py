"""Deterministic RNG stream derivation.

A master seed expands into independent streams keyed by
``(purpose, round, client)`` through numpy's SeedSequence spawn keys,
so any client's stream can be derived in any order by any thread.

Purpose codes: 0 = cohort local training, 1 = oracle probe pass,
2 = cohort selection, 3 = miscellaneous per-round draws.
"""

from __future__ import annotations

import numpy as np

TRAIN = 0
PROBE = 1
SELECT = 2
MISC = 3


def client_stream(seed: int, purpose: int, round_idx: int, client_id: int) -> np.random.Generator:
    key = np.random.SeedSequence(entropy=seed, spawn_key=(purpose, round_idx, client_id))
    return np.random.default_rng(key)


def round_stream(seed: int, purpose: int, round_idx: int) -> np.random.Generator:
    key = np.random.SeedSequence(entropy=seed, spawn_key=(purpose, round_idx))
    return np.random.default_rng(key)
