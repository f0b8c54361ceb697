"""Classifier families, the model factory and the checkpoint registry."""

from tsd_lab.ml.models.base import BaseClassifier, ModelParams
from tsd_lab.ml.models.factory import (
    as_batch,
    build_model,
    declared_parameter_count,
    forward,
    forward_chunked,
    parameter_count,
)
from tsd_lab.ml.models.registry import ModelRegistry, load_checkpoint, save_checkpoint

__all__ = [
    "BaseClassifier",
    "ModelParams",
    "ModelRegistry",
    "as_batch",
    "build_model",
    "declared_parameter_count",
    "forward",
    "forward_chunked",
    "load_checkpoint",
    "parameter_count",
    "save_checkpoint",
]
