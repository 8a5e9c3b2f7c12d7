"""Deterministic named-stream random number derivation.

All randomness flows from one 64-bit root seed.  A stream is addressed by a
name (hashed to a stable 64-bit key) plus an instance index, so Monte Carlo
samples can be generated independently and in any order while staying
bit-reproducible.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream_key", "rng_for"]


def stream_key(name: str) -> int:
    """Stable 64-bit key for a stream name."""
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(root_seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Generator for sample `index` of the named stream under `root_seed`."""
    ss = np.random.SeedSequence(
        entropy=int(root_seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=(stream_key(name), int(index)),
    )
    return np.random.Generator(np.random.Philox(ss))
