"""Deterministic derivation of per-stage random generators.

Every stochastic step of the pipeline (synthesis, block extraction, the
train/test split, weight init, batch sampling) gets its own child generator
derived from the single config seed plus a few name tokens, so reruns with
the same config reproduce every output bit.
"""

import zlib

import numpy as np


def derive_rng(seed, *parts):
    """Child generator keyed on `seed` and the stage/name tokens in `parts`."""
    words = [zlib.crc32(str(p).encode("utf-8")) for p in parts]
    return np.random.default_rng(np.random.SeedSequence([int(seed), *words]))


def derive_seed(seed, *parts):
    """Plain integer seed derived the same way, for APIs that take one."""
    words = [zlib.crc32(str(p).encode("utf-8")) for p in parts]
    state = np.random.SeedSequence([int(seed), *words]).generate_state(1, np.uint64)
    return int(state[0])
