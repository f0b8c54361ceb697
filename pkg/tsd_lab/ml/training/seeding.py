"""Deterministic seed fan-out from one global seed."""

import hashlib

import numpy as np


def _tag_entropy(tag: int | str) -> int:
    if isinstance(tag, int):
        return abs(tag)
    digest = hashlib.sha256(str(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(global_seed: int, *tags: int | str) -> int:
    """
    Child seed for a tagged purpose, e.g. derive_seed(0, "teacher", "CBF", 2).

    Stable across processes and platforms.
    """
    sequence = np.random.SeedSequence([abs(int(global_seed)), *(_tag_entropy(t) for t in tags)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
