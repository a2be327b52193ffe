"""Seed derivation: hash(root, experiment, replicate, ...) -> independent streams."""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root, *parts) -> int:
    """63-bit seed from a root seed and any labels (ints, floats, strings)."""
    h = hashlib.sha256(repr(int(root)).encode())
    for p in parts:
        if isinstance(p, float):
            p = float(p).hex()
        h.update(b"\x1f" + str(p).encode())
    return int.from_bytes(h.digest()[:8], "little") >> 1


def rng_for(seed) -> np.random.Generator:
    """Counter-based generator for a derived seed (a Generator passes through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(key=int(seed)))
