"""Deterministic random streams.

All randomness in the package flows through Philox4x64, a counter-based
generator, keyed as ``key = (seed, stream_index)``.  Any component that
needs several independent streams derives them from its seed and a
documented stream index (trial number, restart number, group number, ...)
so runs are reproducible and independent work can execute in any order.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["make_stream", "derive_seed", "GENERATOR_NAME"]

GENERATOR_NAME = "philox4x64"


def make_stream(seed: int, stream_index: int = 0) -> np.random.Generator:
    """Generator for stream ``stream_index`` of the given seed."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    stream_index = int(stream_index) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=[seed, stream_index]))


def derive_seed(seed: int, label: str) -> int:
    """A labeled sub-seed, so nested components never share streams.

    SHA-256 of (seed, label) truncated to 64 bits; e.g. the simulation
    harness gives its internal design search derive_seed(seed, "design")
    while trials use the raw seed's streams.
    """
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
