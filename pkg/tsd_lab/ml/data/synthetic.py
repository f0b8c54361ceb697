"""
Cylinder-Bell-Funnel generator.

For onset a ~ U[T/8, T/4], duration ~ U[T/4, 3T/4], b = a + duration,
eta, eps ~ N(0, 1):

    cylinder: (6 + eta) * 1[a <= t <= b]                     + eps(t)
    bell:     (6 + eta) * 1[a <= t <= b] * (t - a) / (b - a) + eps(t)
    funnel:   (6 + eta) * 1[a <= t <= b] * (b - t) / (b - a) + eps(t)
"""

import numpy as np

from tsd_lab.domain.enums import Split
from tsd_lab.ml.data.dataset import TimeSeriesDataset

CBF_CLASSES = ("cylinder", "bell", "funnel")
MIN_CBF_LENGTH = 16


def cbf_series(label: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """One CBF series of the given class."""
    t = np.arange(length, dtype=np.float64)
    a = rng.integers(length // 8, length // 4 + 1)
    duration = rng.integers(length // 4, 3 * length // 4 + 1)
    b = min(a + duration, length - 1)
    amplitude = 6.0 + rng.standard_normal()
    window = ((t >= a) & (t <= b)).astype(np.float64)
    span = max(b - a, 1)
    if label == 0:
        shape = window
    elif label == 1:
        shape = window * (t - a) / span
    else:
        shape = window * (b - t) / span
    return amplitude * shape + rng.standard_normal(length)


def generate_cbf(per_class: int, length: int, seed: int, name: str = "CBF", split: Split = Split.TRAIN) -> TimeSeriesDataset:
    """
    Balanced CBF dataset, classes interleaved (0, 1, 2, 0, 1, 2, ...).

    Args:
        per_class: Instances per class (>= 1)
        length: Series length T (>= 16)
        seed: Generator seed

    Returns:
        Unprepared dataset with C = 3
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if length < MIN_CBF_LENGTH:
        raise ValueError(f"length must be >= {MIN_CBF_LENGTH}, got {length}")
    rng = np.random.default_rng(seed)
    labels = np.tile(np.arange(len(CBF_CLASSES)), per_class)
    values = np.stack([cbf_series(int(label), length, rng) for label in labels])
    return TimeSeriesDataset.from_arrays(values, labels, num_classes=len(CBF_CLASSES), name=name, split=split)
