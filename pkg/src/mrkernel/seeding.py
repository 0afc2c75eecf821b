"""Deterministic seed derivation.

All randomness in the toolkit flows through generators seeded from a
base seed plus a component path, so results are reproducible and do not
depend on execution order or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from a mixed tuple of parts."""
    h = hashlib.sha256()
    for part in parts:
        h.update(str(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")


def rng_for(*parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
