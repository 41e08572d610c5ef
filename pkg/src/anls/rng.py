"""Counter-based random streams.

Every random object in the package is drawn from a generator keyed by
``(master seed, tag, index...)``.  Streams are independent of each other, so
adding samples to an ensemble never changes the ones already drawn and
ensembles can be generated in any order or in parallel.
"""
from __future__ import annotations

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ValueError("stream key parts must be non-negative")
    return part


def stream(seed: int, *key) -> np.random.Generator:
    """Generator for the stream ``(seed, *key)``; string parts are hashed."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(_key(k) for k in key))
    return np.random.default_rng(ss)


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Circular complex normals with ``E|z|^2 = 1``."""
    shape = (size,) if np.isscalar(size) else tuple(size)
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)
