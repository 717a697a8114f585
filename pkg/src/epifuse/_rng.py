"""Deterministic seed derivation.

Every random stream in the package is derived from one base seed plus a
component label (and optional integer indices), so that independent stages
never share or reorder draws. Labels are hashed with SHA-256 rather than
``hash()`` because the builtin is salted per process.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(base_seed: int, label: str, *indices: int) -> int:
    """Return a 64-bit seed unique to ``(base_seed, label, *indices)``."""
    entropy = [int(base_seed) & _MASK64, _label_key(label)]
    entropy.extend(int(i) & _MASK64 for i in indices)
    seq = np.random.SeedSequence(entropy)
    return int(seq.generate_state(1, np.uint64)[0])


def rng_for(base_seed: int, label: str, *indices: int) -> np.random.Generator:
    """Generator seeded by :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(base_seed, label, *indices))
