"""
Fast gradient sign perturbations.

x_adv = x + epsilon * sign(d CE(model(x), y) / dx), using true labels.
"""

import numpy as np

from tsd_lab.ml.autograd import Tape, Tensor, cross_entropy
from tsd_lab.ml.data.dataset import Instance
from tsd_lab.ml.models import ModelParams, forward


def fgsm_batch(
    model: ModelParams,
    values: np.ndarray,
    labels: np.ndarray,
    epsilon: float,
    chunk_rows: int = 2048,
) -> np.ndarray:
    """
    Adversarial copies of a [B, T] matrix.

    Rows do not interact, so the gradient of the batch-mean loss has the
    sign of each row's own loss gradient.

    Raises:
        ValueError: epsilon < 0
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    matrix = np.asarray(values, dtype=np.float64)
    if epsilon == 0:
        return matrix.copy()
    labels = np.asarray(labels, dtype=np.int64)
    frozen = model.frozen()
    adversarial = matrix.copy()
    for start in range(0, matrix.shape[0], chunk_rows):
        chunk = matrix[start : start + chunk_rows]
        x = Tensor(chunk[:, np.newaxis, :], requires_grad=True)
        with Tape() as tape:
            loss = cross_entropy(forward(frozen, x), labels[start : start + chunk_rows])
        tape.backward(loss)
        adversarial[start : start + chunk.shape[0]] = chunk + epsilon * np.sign(x.grad[:, 0, :])
    return adversarial


def fgsm_perturb(model: ModelParams, x: Instance | np.ndarray, epsilon: float, label: int | None = None) -> np.ndarray:
    """
    Adversarial copy of one series.

    The label defaults to the instance label when x is an Instance.
    """
    if isinstance(x, Instance):
        series = x.values
        label = x.label if label is None else label
    else:
        series = np.asarray(x, dtype=np.float64)
    if label is None:
        raise ValueError("fgsm_perturb needs the true label of a raw series")
    return fgsm_batch(model, series[np.newaxis], np.array([label]), epsilon)[0]
