"""Series preparation: length standardization and z-normalization."""

from tsd_lab.ml.preprocessing.base import BasePreprocessor
from tsd_lab.ml.preprocessing.series_preprocessor import (
    DEFAULT_TARGET_LENGTH,
    SeriesConfig,
    SeriesPreprocessor,
    resample_linear,
    z_normalize,
)

__all__ = [
    "DEFAULT_TARGET_LENGTH",
    "BasePreprocessor",
    "SeriesConfig",
    "SeriesPreprocessor",
    "resample_linear",
    "z_normalize",
]
