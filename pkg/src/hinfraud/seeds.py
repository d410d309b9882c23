"""Derive independent, reproducible random streams from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def child_seed(root: int, component: str) -> int:
    """A 63-bit seed for ``component``, stable across runs and platforms."""
    ss = np.random.SeedSequence([int(root), zlib.crc32(component.encode("utf-8"))])
    hi, lo = (int(v) for v in ss.generate_state(2, dtype=np.uint32))
    return ((hi << 32) | lo) >> 1


def rng_for(root: int, component: str) -> np.random.Generator:
    return np.random.default_rng(child_seed(root, component))
