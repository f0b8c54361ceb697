"""
Model factory.

Maps a ModelSpec to its family implementation and builds, runs and counts
parameter sets.
"""

from typing import Any

import numpy as np

from tsd_lab.domain.enums import ModelFamily
from tsd_lab.domain.model_schemas import ModelSpec
from tsd_lab.ml.autograd import Tensor, active_tape, as_tensor
from tsd_lab.ml.models.base import BaseClassifier, ModelParams
from tsd_lab.ml.models.fcn import FCNClassifier
from tsd_lab.ml.models.linear import LinearClassifier
from tsd_lab.ml.models.lstm import LSTMClassifier

_FAMILIES: dict[ModelFamily, BaseClassifier] = {
    ModelFamily.FCN: FCNClassifier(),
    ModelFamily.LSTM: LSTMClassifier(),
    ModelFamily.LINEAR: LinearClassifier(),
}


def get_classifier(family: ModelFamily) -> BaseClassifier:
    return _FAMILIES[ModelFamily(family)]


def build_model(spec: ModelSpec, seed: int) -> ModelParams:
    """
    Build a freshly initialized parameter set.

    Args:
        spec: Validated architecture
        seed: Initialization seed; the same (spec, seed) gives identical values

    Returns:
        ModelParams with requires_grad set on every tensor
    """
    classifier = get_classifier(spec.family)
    rng = np.random.default_rng(seed)
    values = classifier.initialize(spec, rng)
    shapes = classifier.parameter_shapes(spec)
    return ModelParams(
        spec=spec,
        tensors={path: Tensor(values[path].reshape(shape), requires_grad=True) for path, shape in shapes.items()},
    )


def forward(params: ModelParams, batch: Any) -> Tensor:
    """
    Logits [batch, C] for an input batch [batch, n, T].

    Raises:
        ShapeError: Batch dimensions do not match the spec
    """
    return get_classifier(params.spec.family).forward(params, as_tensor(batch))


def parameter_count(params: ModelParams | dict[str, Tensor]) -> int:
    """Sum of tensor element counts."""
    tensors = params.tensors if isinstance(params, ModelParams) else params
    return int(sum(t.size for t in tensors.values()))


def declared_parameter_count(spec: ModelSpec) -> int:
    """Parameter count from the declared shapes alone."""
    shapes = get_classifier(spec.family).parameter_shapes(spec)
    return int(sum(int(np.prod(shape)) for shape in shapes.values()))


def as_batch(values: Any) -> np.ndarray:
    """Coerce [T], [B, T] or [B, n, T] input to a float64 [B, n, T] array."""
    array = np.asarray(values, dtype=np.float64)
    if array.ndim == 1:
        return array[np.newaxis, np.newaxis, :]
    if array.ndim == 2:
        return array[:, np.newaxis, :]
    return array


def forward_chunked(params: ModelParams, batch: Any, chunk_size: int = 1024) -> Tensor:
    """
    forward() for large constant batches.

    When the pass must be differentiated (an active tape and trainable
    parameters) it runs in one piece; otherwise rows are evaluated in
    chunks and the logits come back as a constant tensor.
    """
    if active_tape() is not None and params.requires_grad:
        return forward(params, batch)
    rows = batch.data if isinstance(batch, Tensor) else np.asarray(batch, dtype=np.float64)
    if rows.shape[0] <= chunk_size:
        return Tensor(forward(params, rows).data)
    parts = [forward(params, rows[i : i + chunk_size]).data for i in range(0, rows.shape[0], chunk_size)]
    return Tensor(np.concatenate(parts, axis=0))
