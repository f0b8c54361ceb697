"""Dataset types, splits and the synthetic CBF generator."""

from tsd_lab.ml.data.dataset import Instance, TimeSeriesDataset
from tsd_lab.ml.data.splits import reduce_fraction, split_train_val
from tsd_lab.ml.data.synthetic import CBF_CLASSES, generate_cbf

__all__ = [
    "CBF_CLASSES",
    "Instance",
    "TimeSeriesDataset",
    "generate_cbf",
    "reduce_fraction",
    "split_train_val",
]
