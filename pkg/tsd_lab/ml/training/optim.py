"""
Adam and the multi-step learning-rate schedule.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from tsd_lab.ml.models import ModelParams


@dataclass(frozen=True)
class MultiStepSchedule:
    """lr(e) = initial_lr * factor ** (number of milestones <= e), epochs 0-indexed."""

    initial_lr: float
    factor: float = 0.5
    milestones: Sequence[int] = (25, 30, 35)

    def lr(self, epoch: int) -> float:
        passed = sum(1 for m in self.milestones if m <= epoch)
        return self.initial_lr * self.factor**passed


class Adam:
    """Adam over every tensor of a parameter set (betas 0.9/0.999, eps 1e-8)."""

    def __init__(
        self,
        params: ModelParams,
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for name, tensor in self.params.items():
            if tensor.grad is None:
                continue
            grad = tensor.grad
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad * grad
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            tensor.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        self.params.zero_grad()
