"""Deterministic seed fan-out: every (master seed, label path) pair gets its own stream."""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def child_seed(master: int, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(_key(p) for p in path))


def stream(master: int, *path) -> np.random.Generator:
    """Independent generator for the experiment component named by ``path``."""
    return np.random.default_rng(child_seed(master, *path))
