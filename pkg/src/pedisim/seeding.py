"""Counter-based seed derivation: reproducible, order-independent, splittable."""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, index: int, stream: str = "env") -> int:
    """One derived 64-bit seed; a pure function of (master, index, stream)."""
    digest = hashlib.blake2b(f"{stream}:{master}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def derive_seeds(master: int, n: int, stream: str = "env") -> list:
    """n distinct seeds for parallel workers; independent of evaluation order."""
    if n < 1:
        raise ValueError("need at least one seed")
    return [derive_seed(master, i, stream) for i in range(n)]


def generator_for(master: int, index: int, stream: str = "env") -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, index, stream))
