"""
Finite-difference gradient checking.

Compares tape gradients against central differences, the oracle used for
every differentiable primitive and for the composed distillation losses.
"""

from collections.abc import Callable, Mapping

import numpy as np

from tsd_lab.ml.autograd.tensor import Tape, Tensor


def numerical_gradient(fn: Callable[[], float], array: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """
    Central differences of a scalar function w.r.t. an array mutated in place.

    Args:
        fn: Zero-argument function reading ``array`` and returning a float
        array: Array to perturb (restored afterwards)
        h: Step size

    Returns:
        Array of partial derivatives with the shape of ``array``
    """
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        upper = fn()
        flat[i] = original - h
        lower = fn()
        flat[i] = original
        grad_flat[i] = (upper - lower) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Max abs difference scaled by the larger gradient magnitude."""
    scale = max(float(np.max(np.abs(analytic), initial=0.0)), float(np.max(np.abs(numeric), initial=0.0)), floor)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def check_gradients(
    loss_fn: Callable[[], Tensor],
    leaves: Mapping[str, Tensor],
    h: float = 1e-4,
) -> dict[str, float]:
    """
    Relative error between tape and finite-difference gradients per leaf.

    Args:
        loss_fn: Builds the scalar loss from the leaves (called many times)
        leaves: Named tensors with requires_grad=True
        h: Finite-difference step

    Returns:
        Mapping leaf name -> relative error
    """
    for leaf in leaves.values():
        leaf.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)

    def value() -> float:
        return loss_fn().item()

    errors: dict[str, float] = {}
    for name, leaf in leaves.items():
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        numeric = numerical_gradient(value, leaf.data, h=h)
        errors[name] = relative_error(analytic, numeric)
    return errors
