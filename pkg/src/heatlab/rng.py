"""Deterministic, order-independent random streams.

Every stream is derived from one 64-bit master seed plus a tuple of keys
through a counter-based Philox generator, so case ``k`` of a suite draws the
same numbers no matter which other cases run or in what order.
"""
from __future__ import annotations

import zlib

import numpy as np

DEFAULT_SEED = 0x5EED


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        return int(k) & 0xFFFFFFFF
    return zlib.crc32(str(k).encode())


def stream(seed: int, *keys) -> np.random.Generator:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    entropy = [seed & 0xFFFFFFFF, seed >> 32] + [_key(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
