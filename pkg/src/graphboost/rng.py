"""Seeded random streams.

Every random draw in the package flows through a named substream derived
from one run seed, so runs are reproducible and independent stages
(splitting, weight init, dropout, pair sampling) do not perturb each other.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_to_int(tag: int | str) -> int:
    if isinstance(tag, int):
        return tag & _MASK64
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *tags: int | str) -> np.random.Generator:
    """Generator for the substream named by ``tags`` under ``seed``."""
    entropy = [seed & _MASK64] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *tags: int | str) -> int:
    """Stable integer seed for the substream named by ``tags``."""
    entropy = [seed & _MASK64] + [_tag_to_int(t) for t in tags]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
