"""Deterministic labeled RNG substreams.

Every stochastic consumer (each forest tree, each ensemble member, each
evaluation fold) derives its own stream from (seed, label), so results do
not depend on execution order or parallelism.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive(seed: int, *labels: str) -> np.random.Generator:
    """Generator for a named substream of a 64-bit seed."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x00")
        h.update(str(label).encode())
    entropy = int.from_bytes(h.digest()[:16], "big")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
