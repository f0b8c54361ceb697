"""
Subsequence grids.

A grid is the ordered set of (start, width) pairs at which temporal
saliency is evaluated.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SubsequenceGrid:
    """Unique (t, z) pairs sorted by t, each with t + z <= T."""

    pairs: tuple[tuple[int, int], ...]
    series_length: int

    def __post_init__(self) -> None:
        pairs = tuple((int(t), int(z)) for t, z in self.pairs)
        if not pairs:
            raise ValueError("grid needs at least one subsequence")
        for t, z in pairs:
            if t < 0 or z < 1 or t + z > self.series_length:
                raise ValueError(f"subsequence (t={t}, z={z}) does not fit a series of length {self.series_length}")
        if len(set(pairs)) != len(pairs) or list(pairs) != sorted(pairs):
            raise ValueError("grid pairs must be unique and sorted by start")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def starts(self) -> np.ndarray:
        return np.array([t for t, _ in self.pairs], dtype=np.int64)

    @property
    def widths(self) -> np.ndarray:
        return np.array([z for _, z in self.pairs], dtype=np.int64)

    def masks(self) -> np.ndarray:
        """[G, T] indicator of each subsequence."""
        mask = np.zeros((len(self.pairs), self.series_length), dtype=np.float64)
        for g, (t, z) in enumerate(self.pairs):
            mask[g, t : t + z] = 1.0
        return mask


def make_grid(T: int, num_subsequences: int, width: int) -> SubsequenceGrid:
    """
    Evenly spread windows of one width.

    Starts are round(i * (T - width) / (num - 1)) (halves rounded up),
    de-duplicated; a single subsequence starts at 0.

    Raises:
        ValueError: width outside [1, T] or num_subsequences outside [1, T - width + 1]
    """
    if not 1 <= width <= T:
        raise ValueError(f"width must lie in [1, {T}], got {width}")
    if not 1 <= num_subsequences <= T - width + 1:
        raise ValueError(f"num_subsequences must lie in [1, {T - width + 1}], got {num_subsequences}")
    if num_subsequences == 1:
        starts = [0]
    else:
        step = (T - width) / (num_subsequences - 1)
        starts = sorted({int(math.floor(i * step + 0.5)) for i in range(num_subsequences)})
    return SubsequenceGrid(pairs=tuple((t, width) for t in starts), series_length=T)
