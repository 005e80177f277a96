"""Deterministic random-stream derivation for parallel Monte Carlo.

Every stream is a Philox counter-based generator keyed by
(master seed, operation tag, *indices). The same key always produces the
same stream, no matter how many workers are running or in what order blocks
execute, so replication results depend only on the master seed and the
logical layout of the computation.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def tag_to_int(tag: str) -> int:
    """Stable 64-bit integer for an operation tag (sha256, not hash())."""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(master_seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Generator for the (master_seed, tag, *indices) key."""
    entropy = [int(master_seed) & _MASK64, tag_to_int(tag)]
    entropy.extend(int(i) & _MASK64 for i in indices)
    seq = np.random.SeedSequence(entropy)
    return np.random.Generator(np.random.Philox(seq))
