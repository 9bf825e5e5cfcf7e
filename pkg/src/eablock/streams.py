"""Named, counter-based random streams.

Every random draw in the package comes from a numpy ``Philox`` generator whose
128-bit key is ``seed | (crc32(purpose) << 96) | (index << 64)``. Two streams
with different purposes or indices never share a key, so adding a new consumer
cannot shift the numbers seen by an existing one.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


def stream_key(seed: int, purpose: str, index: int = 0) -> int:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    if not 0 <= index <= _MASK32:
        raise ValueError(f"stream index out of range: {index}")
    tag = zlib.crc32(purpose.encode("utf-8")) & _MASK32
    return (seed & _MASK64) | (index << 64) | (tag << 96)


def generator(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Return a fresh generator for the stream ``(seed, purpose, index)``."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, purpose, index)))
