"""
Base Classifier Abstract Class.

Every architecture family implements this interface, so training,
saliency and evaluation code never depends on a concrete network.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from tsd_lab.domain.enums import ModelFamily
from tsd_lab.domain.errors import ShapeError
from tsd_lab.domain.model_schemas import ModelSpec
from tsd_lab.ml.autograd import Tensor


@dataclass
class ModelParams:
    """
    Parameter set of one classifier.

    Maps a parameter path (e.g. ``blocks.0.conv.weight``) to its Tensor.
    Calling the object runs the forward pass of its family.
    """

    spec: ModelSpec
    tensors: dict[str, Tensor] = field(default_factory=dict)

    def __call__(self, batch: Any) -> Tensor:
        from tsd_lab.ml.models.factory import forward

        return forward(self, batch)

    def __getitem__(self, path: str) -> Tensor:
        return self.tensors[path]

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    def copy(self) -> "ModelParams":
        """Deep copy of the values (gradients dropped)."""
        return ModelParams(
            spec=self.spec,
            tensors={
                path: Tensor(t.data.copy(), requires_grad=t.requires_grad)
                for path, t in self.tensors.items()
            },
        )

    def frozen(self) -> "ModelParams":
        """View sharing the arrays but never recorded on a tape."""
        return ModelParams(
            spec=self.spec,
            tensors={path: Tensor(t.data, requires_grad=False) for path, t in self.tensors.items()},
        )

    @property
    def requires_grad(self) -> bool:
        return any(t.requires_grad for t in self.tensors.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        """Copies of the raw arrays, for equality checks."""
        return {path: t.data.copy() for path, t in self.tensors.items()}

    def zero_grad(self) -> None:
        for tensor in self.tensors.values():
            tensor.zero_grad()


class BaseClassifier(ABC):
    """
    Abstract base class for classifier families.

    Provides consistent interface for:
    - Declared parameter shapes
    - Deterministic initialization
    - Forward pass producing logits [batch, C]
    """

    family: ModelFamily

    @abstractmethod
    def parameter_shapes(self, spec: ModelSpec) -> dict[str, tuple[int, ...]]:
        """
        Enumerate every parameter path and its shape.

        Args:
            spec: Architecture description

        Returns:
            Ordered mapping path -> shape
        """

    @abstractmethod
    def initialize(self, spec: ModelSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """
        Draw initial parameter values.

        Args:
            spec: Architecture description
            rng: Seeded generator (consumed in parameter order)

        Returns:
            Mapping path -> array with the declared shape
        """

    @abstractmethod
    def forward(self, params: ModelParams, batch: Tensor) -> Tensor:
        """
        Compute logits.

        Args:
            params: Parameters built from the same family
            batch: Input tensor [batch, n, T]

        Returns:
            Logits tensor [batch, C]
        """

    def check_batch(self, spec: ModelSpec, batch: Tensor) -> None:
        """Validate input dimensions against the spec."""
        if batch.ndim != 3:
            raise ShapeError("model input must be [batch, channels, length]", axis="ndim", expected=3, actual=batch.ndim)
        if batch.shape[1] != spec.input_channels:
            raise ShapeError("input channel mismatch", axis="channels", expected=spec.input_channels, actual=batch.shape[1])
        if batch.shape[2] != spec.input_length:
            raise ShapeError("input length mismatch", axis="length", expected=spec.input_length, actual=batch.shape[2])

    @staticmethod
    def he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        """Normal draw scaled by sqrt(2 / fan_in)."""
        return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)

    def get_info(self, spec: ModelSpec) -> dict[str, Any]:
        """
        Get architecture metadata.

        Returns:
            Dict with family, label and parameter count
        """
        shapes = self.parameter_shapes(spec)
        return {
            "family": self.family.value,
            "label": spec.label,
            "num_parameters": int(sum(np.prod(s) for s in shapes.values())),
            "num_tensors": len(shapes),
        }
