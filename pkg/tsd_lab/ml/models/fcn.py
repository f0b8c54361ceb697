"""
Fully Convolutional Network.

(conv -> per-channel scale/shift -> ReLU) x blocks -> global average pool
-> linear head. The scale/shift pair stands in for batch normalization
and keeps no running statistics.
"""

import numpy as np

from tsd_lab.domain.enums import ModelFamily
from tsd_lab.domain.model_schemas import ModelSpec
from tsd_lab.ml.autograd import Tensor, conv1d
from tsd_lab.ml.models.base import BaseClassifier, ModelParams


def block_channels(spec: ModelSpec) -> list[int]:
    """Output channels per block: width, 2*width in the middle, width last."""
    channels = []
    for i in range(spec.num_blocks):
        middle = 0 < i < spec.num_blocks - 1
        channels.append(spec.width * 2 if middle else spec.width)
    return channels


class FCNClassifier(BaseClassifier):
    """
    Stack of 1D convolutions padded by k // 2 on both ends, with a pooled linear readout.

    Odd kernels keep the length; each even kernel adds one step, which the
    global average pool absorbs.
    """

    family = ModelFamily.FCN

    def parameter_shapes(self, spec: ModelSpec) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        in_channels = spec.input_channels
        for i, (out_channels, k) in enumerate(zip(block_channels(spec), spec.effective_kernel_sizes)):
            shapes[f"blocks.{i}.conv.weight"] = (out_channels, in_channels, k)
            shapes[f"blocks.{i}.scale"] = (out_channels,)
            shapes[f"blocks.{i}.shift"] = (out_channels,)
            in_channels = out_channels
        shapes["head.weight"] = (spec.num_classes, in_channels)
        shapes["head.bias"] = (spec.num_classes,)
        return shapes

    def initialize(self, spec: ModelSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
        values: dict[str, np.ndarray] = {}
        for path, shape in self.parameter_shapes(spec).items():
            if path.endswith("conv.weight"):
                values[path] = self.he_normal(rng, shape, fan_in=shape[1] * shape[2])
            elif path.endswith("scale"):
                values[path] = np.ones(shape)
            elif path == "head.weight":
                values[path] = self.he_normal(rng, shape, fan_in=shape[1])
            else:
                values[path] = np.zeros(shape)
        return values

    def forward(self, params: ModelParams, batch: Tensor) -> Tensor:
        spec = params.spec
        self.check_batch(spec, batch)
        x = batch
        for i, k in enumerate(spec.effective_kernel_sizes):
            x = conv1d(x, params[f"blocks.{i}.conv.weight"], stride=1, padding=k // 2)
            channels = x.shape[1]
            scale = params[f"blocks.{i}.scale"].reshape(1, channels, 1)
            shift = params[f"blocks.{i}.shift"].reshape(1, channels, 1)
            x = (x * scale + shift).relu()
        pooled = x.mean(axis=2)
        return pooled @ params["head.weight"].T + params["head.bias"]
