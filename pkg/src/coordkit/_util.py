"""Shared plumbing: keyed random streams, thread control, CSV formatting."""

from __future__ import annotations

import hashlib
import os

import numpy as np


def substream(seed: int, *tags) -> np.random.Generator:
    """Counter-based random stream keyed by (seed, *tags).

    Streams with distinct tags are independent, and a stream's output never
    depends on how many other streams were created, so adding statistics or
    reordering work cannot perturb sampling.
    """
    material = repr((int(seed),) + tuple(tags)).encode()
    digest = hashlib.blake2b(material, digest_size=16).digest()
    key = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(key=key))


def thread_count() -> int:
    """Worker count, capped by the COORDKIT_THREADS environment variable."""
    env = os.environ.get("COORDKIT_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def fmt(x) -> str:
    """Format a float for CSV output with 15 significant digits."""
    return format(float(x), ".15g")
