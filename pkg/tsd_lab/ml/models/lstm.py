"""
LSTM Classifier.

Stacked one-directional LSTM layers; the last hidden state of the top
layer feeds a linear head. Gate order i, f, g, o.
"""

import numpy as np

from tsd_lab.domain.enums import ModelFamily
from tsd_lab.domain.model_schemas import ModelSpec
from tsd_lab.ml.autograd import Tensor
from tsd_lab.ml.models.base import BaseClassifier, ModelParams


class LSTMClassifier(BaseClassifier):
    """Compact recurrent classifier with last-timestep readout."""

    family = ModelFamily.LSTM

    def parameter_shapes(self, spec: ModelSpec) -> dict[str, tuple[int, ...]]:
        hidden = spec.width
        shapes: dict[str, tuple[int, ...]] = {}
        in_size = spec.input_channels
        for layer in range(spec.num_blocks):
            shapes[f"lstm.{layer}.weight_ih"] = (4 * hidden, in_size)
            shapes[f"lstm.{layer}.weight_hh"] = (4 * hidden, hidden)
            shapes[f"lstm.{layer}.bias_ih"] = (4 * hidden,)
            shapes[f"lstm.{layer}.bias_hh"] = (4 * hidden,)
            in_size = hidden
        shapes["head.weight"] = (spec.num_classes, hidden)
        shapes["head.bias"] = (spec.num_classes,)
        return shapes

    def initialize(self, spec: ModelSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
        bound = 1.0 / np.sqrt(spec.width)
        values: dict[str, np.ndarray] = {}
        for path, shape in self.parameter_shapes(spec).items():
            if path.startswith("lstm."):
                values[path] = rng.uniform(-bound, bound, size=shape)
            elif path == "head.weight":
                values[path] = self.he_normal(rng, shape, fan_in=shape[1])
            else:
                values[path] = np.zeros(shape)
        return values

    def forward(self, params: ModelParams, batch: Tensor) -> Tensor:
        spec = params.spec
        self.check_batch(spec, batch)
        hidden = spec.width
        size = batch.shape[0]
        steps = spec.input_length

        # [B, T, n]
        sequence = batch.transpose(0, 2, 1)
        h = Tensor(np.zeros((size, hidden)))
        for layer in range(spec.num_blocks):
            w_ih = params[f"lstm.{layer}.weight_ih"].T
            w_hh = params[f"lstm.{layer}.weight_hh"].T
            bias = params[f"lstm.{layer}.bias_ih"] + params[f"lstm.{layer}.bias_hh"]
            # Input projection for all timesteps at once: [B, T, 4H]
            projected = sequence @ w_ih + bias
            h = Tensor(np.zeros((size, hidden)))
            c = Tensor(np.zeros((size, hidden)))
            outputs: list[Tensor] = []
            for t in range(steps):
                gates = projected[:, t, :] + h @ w_hh
                i = gates[:, 0:hidden].sigmoid()
                f = gates[:, hidden : 2 * hidden].sigmoid()
                g = gates[:, 2 * hidden : 3 * hidden].tanh()
                o = gates[:, 3 * hidden :].sigmoid()
                c = f * c + i * g
                h = o * c.tanh()
                outputs.append(h)
            if layer < spec.num_blocks - 1:
                sequence = _stack_time(outputs)
        return h @ params["head.weight"].T + params["head.bias"]


def _stack_time(outputs: list[Tensor]) -> Tensor:
    """Stack per-step hidden states [B, H] into [B, T, H]."""
    from tsd_lab.ml.autograd.tensor import make_result

    data = np.stack([o.data for o in outputs], axis=1)

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return [g[:, t, :] for t in range(len(outputs))]

    return make_result("stack_time", data, tuple(outputs), backward)
