"""Deterministic sub-seed derivation.

Every random stream in the package is derived as ``(seed, stream_id, ...)``
through ``numpy.random.SeedSequence``, so disjoint streams never interact and
regenerating any artifact from the same ids is bit-reproducible.
"""

from __future__ import annotations

import numpy as np


def child_rng(seed: int, *stream_ids: int) -> np.random.Generator:
    """Generator for the child stream ``(seed, *stream_ids)``."""
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream_ids)))


# stream ids used across the package
STREAM_TRAIN_DATA = 0
STREAM_TEST_DATA = 1
STREAM_MODEL_INIT = 2
STREAM_PROJECTOR_INIT = 3
STREAM_SHUFFLE = 4
STREAM_MIXTURE_BASIS = 5
STREAM_SEQ_INIT = 6
