"""Stable seed derivation so every pipeline stage gets an independent,
reproducible stream from one master seed."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, label: str) -> int:
    """64-bit seed derived by hashing (master, label); stable across runs."""
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
