"""Deterministic seed derivation.

Every stage and fold gets its own seed hashed off the master seed and a
label, so any stage can be re-run in isolation and reproduce the exact
randomness it saw inside the full pipeline.
"""

from __future__ import annotations

import hashlib


def derive_seed(master_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
