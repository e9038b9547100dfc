"""Deterministic seed derivation from structured keys."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """Map an arbitrary tuple of keys to a 63-bit seed, stable across processes."""
    payload = "\x1f".join(f"{type(p).__name__}:{p}" for p in parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def rng_for(*parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
