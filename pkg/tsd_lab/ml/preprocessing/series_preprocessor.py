"""
Series Preprocessor.

Standardizes series to a common length by linear interpolation, then
z-normalizes each series on its own (population std).
"""

from dataclasses import dataclass, replace

import numpy as np

from tsd_lab.domain.errors import DatasetError
from tsd_lab.ml.data.dataset import Instance, TimeSeriesDataset
from tsd_lab.ml.preprocessing.base import BasePreprocessor

DEFAULT_TARGET_LENGTH = 100
CONSTANT_STD = 1e-8


def resample_linear(values: np.ndarray, target_len: int) -> np.ndarray:
    """
    Linear interpolation onto target_len evenly spaced positions.

    output[j] samples the input at j * (L - 1) / (target_len - 1), so both
    endpoints are kept exactly.

    Raises:
        ValueError: Input or target length below 2
    """
    series = np.asarray(values, dtype=np.float64).ravel()
    if series.size < 2:
        raise ValueError(f"resample_linear needs at least 2 input points, got {series.size}")
    if target_len < 2:
        raise ValueError(f"target_len must be >= 2, got {target_len}")
    if series.size == target_len:
        return series.copy()
    positions = np.arange(target_len) * (series.size - 1) / (target_len - 1)
    out = np.interp(positions, np.arange(series.size), series)
    out[0], out[-1] = series[0], series[-1]
    return out


def z_normalize(values: np.ndarray) -> np.ndarray:
    """(x - mean) / std with population std; near-constant series map to zeros."""
    series = np.asarray(values, dtype=np.float64).ravel()
    if series.size == 0:
        raise ValueError("z_normalize needs a non-empty series")
    std = series.std()
    if std < CONSTANT_STD:
        return np.zeros_like(series)
    return (series - series.mean()) / std


@dataclass
class SeriesConfig:
    """Configuration for series preprocessing."""

    target_length: int = DEFAULT_TARGET_LENGTH
    resample: bool = True
    normalize: bool = True

    @property
    def order(self) -> str:
        """Recorded in run metadata."""
        return "interpolate-then-normalize"


class SeriesPreprocessor(BasePreprocessor):
    """prepare = z_normalize . resample_linear"""

    def __init__(self, config: SeriesConfig | None = None) -> None:
        self.config = config or SeriesConfig()

    def process(self, values: np.ndarray) -> np.ndarray:
        series = np.asarray(values, dtype=np.float64).ravel()
        if self.config.resample:
            series = resample_linear(series, self.config.target_length)
        if self.config.normalize:
            series = z_normalize(series)
        return series

    def process_dataset(self, dataset: TimeSeriesDataset) -> TimeSeriesDataset:
        """
        Raises:
            DatasetError: A series is non-finite or too short to resample
        """
        invalid = [inst.instance_id for inst in dataset.instances if not self.validate(inst.values)]
        if invalid:
            raise DatasetError(
                f"'{dataset.name}' ({dataset.split.value}) has {len(invalid)} series that cannot be prepared, "
                f"instance ids {invalid[:10]}"
            )
        instances = tuple(
            Instance(
                values=self.process(inst.values),
                label=inst.label,
                prepared=True,
                instance_id=inst.instance_id,
            )
            for inst in dataset.instances
        )
        return replace(dataset, instances=instances).with_metadata(preparation=self.config.order)

    def validate(self, values: np.ndarray) -> bool:
        series = np.asarray(values, dtype=np.float64).ravel()
        if not np.isfinite(series).all():
            return False
        return series.size >= 2 or not self.config.resample
