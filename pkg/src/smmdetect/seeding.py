"""Deterministic seed derivation.

Every random draw in the package flows from a 64-bit base seed through
``child_seed``.  Derivation uses ``numpy.random.SeedSequence`` with the
index path as the spawn key, so the stream for (repetition, fold, role)
is independent of execution order and identical across processes and
platforms.
"""

import numpy as np

# Role indices appended to the (repetition, fold) path so that the
# balancing subsample, weight init, trainer shuffling and SVM sampling
# never share a stream.
BALANCE = 0
INIT = 1
TRAIN = 2
SVM = 3
SOURCE = 4


def child_seed(base_seed: int, *path: int) -> int:
    """Derive a 64-bit seed from ``base_seed`` and an index path."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def rng_from(base_seed: int, *path: int) -> np.random.Generator:
    """PCG64 generator seeded via :func:`child_seed`."""
    return np.random.default_rng(child_seed(base_seed, *path))
