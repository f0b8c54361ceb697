"""
Inference Service.

No-tape batched prediction: logits, softened probabilities and top-1
classes for a dataset or a raw [M, T] value matrix.
"""

from dataclasses import dataclass

import numpy as np

from tsd_lab.ml.autograd import softmax_temperature
from tsd_lab.ml.data.dataset import TimeSeriesDataset
from tsd_lab.ml.models import ModelParams, as_batch, forward_chunked

DEFAULT_CHUNK_ROWS = 1024


@dataclass
class PredictionResult:
    """Result from batched inference."""

    model_name: str
    logits: np.ndarray
    probabilities: np.ndarray
    predictions: np.ndarray
    tau: float = 1.0


def predict(params: ModelParams, data: TimeSeriesDataset | np.ndarray, tau: float = 1.0, name: str = "") -> PredictionResult:
    """
    Run a model without recording anything on a tape.

    Args:
        params: Model parameters
        data: Dataset or [M, T] / [M, n, T] values
        tau: Temperature of the returned probabilities
    """
    values = data.as_batch() if isinstance(data, TimeSeriesDataset) else as_batch(data)
    logits = forward_chunked(params.frozen(), values, chunk_size=DEFAULT_CHUNK_ROWS).data
    probabilities = softmax_temperature(logits, tau).data
    return PredictionResult(
        model_name=name,
        logits=logits,
        probabilities=probabilities,
        predictions=logits.argmax(axis=-1),
        tau=tau,
    )

