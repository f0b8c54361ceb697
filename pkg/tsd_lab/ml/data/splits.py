"""
Stratified, seeded dataset splits.
"""

import numpy as np
from loguru import logger

from tsd_lab.domain.enums import Split
from tsd_lab.domain.errors import DatasetError
from tsd_lab.ml.data.dataset import TimeSeriesDataset


def _class_positions(dataset: TimeSeriesDataset) -> dict[int, np.ndarray]:
    labels = dataset.labels
    return {c: np.flatnonzero(labels == c) for c in range(dataset.num_classes) if (labels == c).any()}


def split_train_val(
    dataset: TimeSeriesDataset,
    val_fraction: float,
    seed: int,
) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """
    Stratified train/validation split.

    Each class with n >= 2 instances sends clamp(round(n * val_fraction), 1, n - 1)
    of them to validation. Singleton classes stay in train with a warning.

    Raises:
        ValueError: val_fraction outside (0, 1)
        DatasetError: No class could contribute a validation instance
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    val_idx: list[int] = []
    for label, positions in _class_positions(dataset).items():
        shuffled = rng.permutation(positions)
        n = shuffled.size
        if n < 2:
            logger.warning(f"Class {label} of '{dataset.name}' has a single instance; kept in train")
            train_idx.extend(int(i) for i in shuffled)
            continue
        n_val = int(min(max(round(n * val_fraction), 1), n - 1))
        val_idx.extend(int(i) for i in shuffled[:n_val])
        train_idx.extend(int(i) for i in shuffled[n_val:])

    if not val_idx:
        raise DatasetError(f"Validation split of '{dataset.name}' would be empty (val_fraction={val_fraction})")
    train = dataset.subset(sorted(train_idx), split=Split.TRAIN)
    val = dataset.subset(sorted(val_idx), split=Split.VAL)
    logger.debug(f"Split '{dataset.name}': {len(train)} train / {len(val)} val")
    return train, val


def reduce_fraction(dataset: TimeSeriesDataset, fraction: float, seed: int) -> TimeSeriesDataset:
    """
    Keep a stratified fraction of a split (at least one instance per class).

    fraction == 1.0 returns the dataset unchanged.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return dataset
    rng = np.random.default_rng(seed)
    keep: list[int] = []
    for positions in _class_positions(dataset).values():
        n_keep = max(1, int(round(positions.size * fraction)))
        keep.extend(int(i) for i in rng.permutation(positions)[:n_keep])
    return dataset.subset(sorted(keep))
