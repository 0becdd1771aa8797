"""Labelled sub-seeds derived from one master seed.

``derive_seed(master, label, counter)`` is the first 8 bytes (big-endian) of
SHA-256 over the UTF-8 string ``"{master}:{label}:{counter}"``, so every stream
is reproducible across platforms and Python versions.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, label: str, counter: int = 0) -> int:
    digest = hashlib.sha256(f"{master}:{label}:{counter}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(master: int, label: str, counter: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, label, counter))
