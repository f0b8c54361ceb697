"""Reverse-mode automatic differentiation over dense float64 tensors."""

from tsd_lab.ml.autograd.functional import (
    conv1d,
    cross_entropy,
    kl_divergence,
    log_softmax_temperature,
    smooth_l1,
    softmax_temperature,
)
from tsd_lab.ml.autograd.tensor import Tape, Tensor, active_tape, as_tensor

__all__ = [
    "Tape",
    "Tensor",
    "active_tape",
    "as_tensor",
    "conv1d",
    "cross_entropy",
    "kl_divergence",
    "log_softmax_temperature",
    "smooth_l1",
    "softmax_temperature",
]
