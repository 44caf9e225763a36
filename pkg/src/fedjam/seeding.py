"""Deterministic RNG derivation.

Every random draw in the package flows through `derive_rng` so that any
(master seed, context keys) pair names exactly one stream, independent of
call order, thread scheduling, and process count.
"""

import numpy as np

_MASK = (1 << 63) - 1


def derive_rng(*keys: int) -> np.random.Generator:
    """Generator keyed by an ordered tuple of non-negative integers."""
    return np.random.default_rng([int(k) & _MASK for k in keys])


def derive_seed(*keys: int) -> int:
    """A single 63-bit integer seed derived from the key tuple."""
    ss = np.random.SeedSequence([int(k) & _MASK for k in keys])
    return int(ss.generate_state(1, np.uint64)[0]) & _MASK
