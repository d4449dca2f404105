import hashlib
from typing import Any

import numpy as np


def derive_seed(base_seed: int, *counters: int) -> int:
    """
    Derives a non-negative 63-bit seed from a base seed and a path of counters.

    Every random stream in the project is keyed this way, e.g. (base_seed, instance_index),
    so no component ever touches a global RNG.
    """
    sequence = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, *[int(c) for c in counters]])
    return int(sequence.generate_state(1, dtype=np.uint64)[0]) >> 1


def make_rng(seed: int, *counters: int) -> np.random.Generator:
    """Returns a numpy Generator for the stream (seed, *counters)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(c) for c in counters]]))


def stable_hash(obj: Any) -> int:
    """Process-independent 64-bit hash of repr(obj) (builtin hash() is salted per process)."""
    digest = hashlib.sha256(repr(obj).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def unit_interval(obj: Any, seed: int) -> float:
    """Deterministic value in [0, 1) for (obj, seed)."""
    return stable_hash((seed, obj)) / float(1 << 64)
