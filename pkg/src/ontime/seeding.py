"""Deterministic per-stage seed derivation.

Every random stage of an experiment draws from its own numpy ``Generator``
seeded by ``derive_seed(master, stage, index)``.  The derivation is
SplitMix64-based and defined bit-exactly so it can be reproduced elsewhere:

    fnv  = FNV-1a 64 of the UTF-8 stage name
    s1   = mix64(master XOR fnv)
    seed = mix64(s1 + index)          (all arithmetic mod 2**64)

where ``mix64(z)`` adds the golden gamma 0x9E3779B97F4A7C15 and applies the
SplitMix64 finalizer.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z = (z + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def derive_seed(master: int, stage: str, index: int = 0) -> int:
    """Seed for ``stage`` (and its ``index``-th repetition) under ``master``."""
    if master < 0 or index < 0:
        raise ValueError("seeds and indices must be non-negative")
    s1 = mix64((master & MASK64) ^ fnv1a64(stage))
    return mix64((s1 + index) & MASK64)


def rng_for(master: int, stage: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, stage, index))
