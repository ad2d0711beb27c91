"""Splittable seed derivation.

Every random stream in the package is addressed by ``(root, tag, *index)``:
``root`` is the run seed, ``tag`` a short module/purpose string and ``index``
a tuple of non-negative integers (trial number, coordinate number, ...).
The tag is hashed with CRC-32 so the derivation is stable across processes
and Python versions, and the tuple becomes the ``spawn_key`` of a numpy
``SeedSequence``.  Streams with different addresses are statistically
independent; the same address always yields the same stream.
"""

from __future__ import annotations

import zlib

import numpy as np


def tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def seed_sequence(root: int, tag: str, *index: int) -> np.random.SeedSequence:
    if root < 0 or any(i < 0 for i in index):
        raise ValueError("seeds and indices must be non-negative")
    return np.random.SeedSequence(entropy=int(root), spawn_key=(tag_id(tag), *map(int, index)))


def rng(root: int, tag: str, *index: int) -> np.random.Generator:
    """Generator for the stream addressed by ``(root, tag, *index)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(root, tag, *index)))
