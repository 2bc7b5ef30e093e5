"""Deterministic seed derivation.

Every random draw in the pipeline comes from a numpy Generator seeded
through this module, so a single master seed reproduces corpora, model
weights, and generated signals byte-for-byte.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_hash(text: str) -> int:
    """Map a string to a 64-bit integer, stable across processes and platforms."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed_sequence(master_seed: int, *keys: str | int) -> np.random.SeedSequence:
    """Build a SeedSequence from a master seed plus contextual keys.

    String keys are hashed; integer keys are used directly.  The same
    (master_seed, keys) always yields the same stream.
    """
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF]
    for key in keys:
        entropy.append(stable_hash(key) if isinstance(key, str) else int(key) & 0xFFFFFFFFFFFFFFFF)
    return np.random.SeedSequence(entropy)


def derive_rng(master_seed: int, *keys: str | int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(master_seed, *keys)))
