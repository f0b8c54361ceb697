"""Linear classifier on the flattened series."""

import numpy as np

from tsd_lab.domain.enums import ModelFamily
from tsd_lab.domain.model_schemas import ModelSpec
from tsd_lab.ml.autograd import Tensor
from tsd_lab.ml.models.base import BaseClassifier, ModelParams


class LinearClassifier(BaseClassifier):
    """logits = W . flatten(x) + b"""

    family = ModelFamily.LINEAR

    def parameter_shapes(self, spec: ModelSpec) -> dict[str, tuple[int, ...]]:
        features = spec.input_channels * spec.input_length
        return {
            "head.weight": (spec.num_classes, features),
            "head.bias": (spec.num_classes,),
        }

    def initialize(self, spec: ModelSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
        shapes = self.parameter_shapes(spec)
        weight_shape = shapes["head.weight"]
        return {
            "head.weight": self.he_normal(rng, weight_shape, fan_in=weight_shape[1]),
            "head.bias": np.zeros(shapes["head.bias"]),
        }

    def forward(self, params: ModelParams, batch: Tensor) -> Tensor:
        spec = params.spec
        self.check_batch(spec, batch)
        flat = batch.reshape(batch.shape[0], spec.input_channels * spec.input_length)
        return flat @ params["head.weight"].T + params["head.bias"]
