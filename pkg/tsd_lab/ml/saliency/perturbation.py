"""
Opposing-class perturbation.

A subsequence of the series is replaced by the same time steps of a
background instance from another class.
"""

from dataclasses import dataclass, field

import numpy as np

from tsd_lab.domain.errors import DatasetError, ShapeError
from tsd_lab.ml.data.dataset import Instance, TimeSeriesDataset
from tsd_lab.ml.saliency.grid import SubsequenceGrid

OPPOSING_CLASS_RANDOM = "OPPOSING_CLASS_RANDOM"


def _series(value: Instance | np.ndarray) -> np.ndarray:
    return value.values if isinstance(value, Instance) else np.asarray(value, dtype=np.float64)


def perturb(x: Instance | np.ndarray, background: Instance | np.ndarray, t: int, z: int) -> np.ndarray:
    """
    Splice background[t:t+z] into x.

    Raises:
        ShapeError: x and background differ in length
        IndexError: Window outside the series
    """
    series, other = _series(x), _series(background)
    if series.shape != other.shape:
        raise ShapeError("background length differs from series", axis="length", expected=series.size, actual=other.size)
    if t < 0 or z < 1 or t + z > series.size:
        raise IndexError(f"window (t={t}, z={z}) outside series of length {series.size}")
    out = series.copy()
    out[t : t + z] = other[t : t + z]
    return out


def perturb_grid(originals: np.ndarray, backgrounds: np.ndarray, grid: SubsequenceGrid) -> np.ndarray:
    """
    Every grid perturbation of every series.

    Args:
        originals: [B, T]
        backgrounds: [B, T]

    Returns:
        [B, G, T]
    """
    if originals.shape != backgrounds.shape:
        raise ShapeError("backgrounds do not align with series", axis="length", expected=originals.shape[-1], actual=backgrounds.shape[-1])
    if originals.shape[-1] != grid.series_length:
        raise ShapeError("grid built for another series length", axis="length", expected=grid.series_length, actual=originals.shape[-1])
    mask = grid.masks()[np.newaxis]
    return originals[:, np.newaxis, :] * (1.0 - mask) + backgrounds[:, np.newaxis, :] * mask


@dataclass
class BackgroundSelector:
    """
    Seeded opposing-class background draws.

    The draw for (epoch, index) only depends on (seed, epoch, index), so it
    is the same no matter which batch or thread asks for it.
    """

    source: TimeSeriesDataset
    seed: int
    policy: str = OPPOSING_CLASS_RANDOM
    _others: dict[int, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.policy != OPPOSING_CLASS_RANDOM:
            raise ValueError(f"Unknown background policy '{self.policy}'")
        labels = self.source.labels
        self._others = {c: np.flatnonzero(labels != c) for c in range(self.source.num_classes)}

    def select_index(self, label: int, epoch: int, index: int) -> int:
        """Position in ``source`` of the background for one instance."""
        candidates = self._others[int(label)]
        if candidates.size == 0:
            raise DatasetError(f"'{self.source.name}' has no instance outside class {label} to use as background")
        rng = np.random.default_rng([abs(int(self.seed)), int(epoch), int(index)])
        return int(candidates[rng.integers(candidates.size)])

    def select(self, label: int, epoch: int, index: int) -> Instance:
        return self.source[self.select_index(label, epoch, index)]

    def select_batch(self, labels: np.ndarray, epoch: int, indices: np.ndarray) -> np.ndarray:
        """[B, T] backgrounds for instances with the given labels and source positions."""
        return np.stack(
            [self.select(int(label), epoch, int(index)).values for label, index in zip(labels, indices)]
        )
