"""
Post-hoc attribution maps.

Occlusion, plain gradient saliency and integrated gradients, each
producing one importance value per time step. Batched functions take a
[B, T] matrix; the single-series wrappers take an Instance or a sequence.
Maps explain the model's predicted class.
"""

import numpy as np
import pandas as pd

from tsd_lab.domain.errors import ShapeError
from tsd_lab.ml.autograd import Tape, Tensor, softmax_temperature
from tsd_lab.ml.data.dataset import Instance
from tsd_lab.ml.models import ModelParams, forward, forward_chunked

DEFAULT_CHUNK_ROWS = 2048


def _matrix(values: np.ndarray | Instance) -> np.ndarray:
    if isinstance(values, Instance):
        return values.values[np.newaxis]
    array = np.asarray(values, dtype=np.float64)
    return array[np.newaxis] if array.ndim == 1 else array


def predict_classes(model: ModelParams, values: np.ndarray) -> np.ndarray:
    """Top-1 class per row of a [B, T] matrix (no tape)."""
    frozen = model.frozen()
    logits = forward_chunked(frozen, values[:, np.newaxis, :], chunk_size=DEFAULT_CHUNK_ROWS)
    return logits.data.argmax(axis=-1)


def occlusion_maps(
    model: ModelParams,
    values: np.ndarray,
    window: int = 1,
    baseline_value: float = 0.0,
    chunk_rows: int = DEFAULT_CHUNK_ROWS,
) -> np.ndarray:
    """
    Occlusion importance, [B, T].

    Every window position (stride 1) is replaced by baseline_value; a time
    step scores the predicted-class probability drop averaged over the
    windows that cover it.

    Raises:
        ValueError: window outside [1, T]
    """
    matrix = _matrix(values)
    size, length = matrix.shape
    if not 1 <= window <= length:
        raise ValueError(f"window must lie in [1, {length}], got {window}")
    frozen = model.frozen()
    num_windows = length - window + 1
    masks = np.zeros((num_windows, length))
    for s in range(num_windows):
        masks[s, s : s + window] = 1.0
    coverage = masks.sum(axis=0)

    maps = np.zeros((size, length))
    per_chunk = max(1, chunk_rows // (num_windows + 1))
    for start in range(0, size, per_chunk):
        chunk = matrix[start : start + per_chunk]
        n = chunk.shape[0]
        occluded = chunk[:, np.newaxis, :] * (1.0 - masks) + baseline_value * masks
        rows = np.concatenate([chunk[:, np.newaxis, :], occluded], axis=1).reshape(n * (num_windows + 1), 1, length)
        probs = softmax_temperature(forward(frozen, rows), 1.0).data.reshape(n, num_windows + 1, -1)
        predicted = probs[:, 0, :].argmax(axis=-1)
        p_pred = probs[np.arange(n), :, predicted]  # [n, W + 1]
        drops = p_pred[:, :1] - p_pred[:, 1:]
        maps[start : start + n] = (drops @ masks) / coverage
    return maps


def gradient_saliency_maps(model: ModelParams, values: np.ndarray, chunk_rows: int = DEFAULT_CHUNK_ROWS) -> np.ndarray:
    """|d logit_pred / d x_t|, [B, T]."""
    matrix = _matrix(values)
    frozen = model.frozen()
    maps = np.zeros_like(matrix)
    for start in range(0, matrix.shape[0], chunk_rows):
        chunk = matrix[start : start + chunk_rows]
        x = Tensor(chunk[:, np.newaxis, :], requires_grad=True)
        with Tape() as tape:
            logits = forward(frozen, x)
            onehot = np.eye(logits.shape[-1])[logits.data.argmax(axis=-1)]
            objective = (logits * onehot).sum()
        tape.backward(objective)
        maps[start : start + chunk.shape[0]] = np.abs(x.grad[:, 0, :])
    return maps


def integrated_gradients_maps(
    model: ModelParams,
    values: np.ndarray,
    baselines: np.ndarray | None = None,
    steps: int = 32,
    chunk_rows: int = DEFAULT_CHUNK_ROWS,
) -> np.ndarray:
    """
    Integrated gradients of the predicted-class logit, [B, T].

    (x - baseline) times the mean gradient at the midpoints
    alpha_k = (k + 0.5) / steps of the straight path. Baselines default to zeros.

    Raises:
        ValueError: steps < 1
        ShapeError: Baseline shape differs from the inputs
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    matrix = _matrix(values)
    base = np.zeros_like(matrix) if baselines is None else _matrix(baselines)
    if base.shape != matrix.shape:
        raise ShapeError("baseline shape differs from input", axis="length", expected=matrix.shape[-1], actual=base.shape[-1])
    frozen = model.frozen()
    targets = predict_classes(frozen, matrix)
    alphas = (np.arange(steps) + 0.5) / steps
    size, length = matrix.shape
    maps = np.zeros_like(matrix)
    per_chunk = max(1, chunk_rows // steps)
    for start in range(0, size, per_chunk):
        x, b = matrix[start : start + per_chunk], base[start : start + per_chunk]
        n = x.shape[0]
        path = b[:, np.newaxis, :] + alphas[np.newaxis, :, np.newaxis] * (x - b)[:, np.newaxis, :]
        inputs = Tensor(path.reshape(n * steps, 1, length), requires_grad=True)
        with Tape() as tape:
            logits = forward(frozen, inputs)
            onehot = np.eye(logits.shape[-1])[np.repeat(targets[start : start + n], steps)]
            objective = (logits * onehot).sum()
        tape.backward(objective)
        mean_grad = inputs.grad.reshape(n, steps, length).mean(axis=1)
        maps[start : start + n] = (x - b) * mean_grad
    return maps


def occlusion_map(model: ModelParams, x: Instance | np.ndarray, window: int = 1, baseline_value: float = 0.0) -> np.ndarray:
    """Occlusion importance of one series, length T."""
    return occlusion_maps(model, _matrix(x), window=window, baseline_value=baseline_value)[0]


def gradient_saliency(model: ModelParams, x: Instance | np.ndarray) -> np.ndarray:
    """Gradient saliency of one series, length T."""
    return gradient_saliency_maps(model, _matrix(x))[0]


def integrated_gradients(
    model: ModelParams,
    x: Instance | np.ndarray,
    baseline: Instance | np.ndarray | None = None,
    steps: int = 32,
) -> np.ndarray:
    """Integrated gradients of one series, length T."""
    base = None if baseline is None else _matrix(baseline)
    return integrated_gradients_maps(model, _matrix(x), base, steps=steps)[0]


def normalize_max_abs(maps: np.ndarray) -> np.ndarray:
    """Scale each row by its max |value|; all-zero rows stay zero."""
    scale = np.abs(maps).max(axis=-1, keepdims=True)
    return np.divide(maps, scale, out=np.zeros_like(maps), where=scale > 0)


def maps_frame(instance_ids: np.ndarray, maps: np.ndarray) -> pd.DataFrame:
    """Export layout: instance id, then one column per time step."""
    frame = pd.DataFrame(maps, columns=[f"t{i}" for i in range(maps.shape[1])])
    frame.insert(0, "instance_id", np.asarray(instance_ids, dtype=np.int64))
    return frame
