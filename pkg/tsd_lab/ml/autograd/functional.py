"""
Differentiable neural-network primitives.

conv1d, temperature softmax, KL divergence, Smooth-L1 and cross-entropy,
each with a hand-written backward. All inputs may be Tensors or array-likes;
array-likes are treated as constants.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from tsd_lab.domain.errors import ShapeError
from tsd_lab.ml.autograd.tensor import Tensor, as_tensor, make_result, unbroadcast

KL_EPSILON = 1e-12
SMOOTH_L1_BETA = 1.0


def conv1d(input: Any, kernel: Any, stride: int = 1, padding: int = 0) -> Tensor:
    """
    1D cross-correlation (no kernel flip).

    Args:
        input: [channels, length] or [batch, channels, length]
        kernel: [out_channels, in_channels, k]
        stride: Step between windows (>= 1)
        padding: Zeros added on both ends

    Returns:
        [out_channels, out_length] or [batch, out_channels, out_length],
        out_length = floor((length + 2*padding - k) / stride) + 1

    Raises:
        ShapeError: Channel or length mismatch
    """
    x_t, w_t = as_tensor(input), as_tensor(kernel)
    x, w = x_t.data, w_t.data
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if padding < 0:
        raise ValueError(f"padding must be >= 0, got {padding}")
    if x.ndim not in (2, 3):
        raise ShapeError("conv1d input must be [C, L] or [B, C, L]", axis="ndim", expected=3, actual=x.ndim)
    if w.ndim != 3:
        raise ShapeError("conv1d kernel must be [out, in, k]", axis="kernel_ndim", expected=3, actual=w.ndim)

    unbatched = x.ndim == 2
    if unbatched:
        x = x[np.newaxis]
    batch, in_channels, length = x.shape
    out_channels, kernel_in, k = w.shape
    if kernel_in != in_channels:
        raise ShapeError("conv1d channel mismatch", axis="in_channels", expected=kernel_in, actual=in_channels)
    if k > length + 2 * padding:
        raise ShapeError("conv1d kernel longer than padded input", axis="length", expected=k, actual=length + 2 * padding)

    padded = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
    windows = sliding_window_view(padded, k, axis=2)[:, :, ::stride, :]
    out_length = windows.shape[2]
    # [B, L_out, C_in * k]
    cols = windows.transpose(0, 2, 1, 3).reshape(batch, out_length, in_channels * k)
    w_flat = w.reshape(out_channels, in_channels * k)
    out = (cols @ w_flat.T).transpose(0, 2, 1)
    if unbatched:
        out = out[0]

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g3 = g[np.newaxis] if unbatched else g
        g_t = g3.transpose(0, 2, 1)  # [B, L_out, C_out]
        grad_w = (g_t.reshape(-1, out_channels).T @ cols.reshape(-1, in_channels * k)).reshape(w.shape)
        grad_cols = (g_t @ w_flat).reshape(batch, out_length, in_channels, k).transpose(0, 2, 1, 3)
        grad_padded = np.zeros(padded.shape, dtype=np.float64)
        span = stride * (out_length - 1) + 1
        for j in range(k):
            grad_padded[:, :, j : j + span : stride] += grad_cols[..., j]
        grad_x = grad_padded[:, :, padding : padding + length]
        return (grad_x[0] if unbatched else grad_x), grad_w

    return make_result("conv1d", out, (x_t, w_t), backward)


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")


def softmax_temperature(logits: Any, tau: float = 1.0) -> Tensor:
    """
    softmax(logits / tau) along the last axis, with max-subtraction.

    Raises:
        ValueError: tau <= 0
    """
    _check_tau(tau)
    z_t = as_tensor(logits)
    z = z_t.data / tau
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    probs = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        inner = (g * probs).sum(axis=-1, keepdims=True)
        return (probs * (g - inner) / tau,)

    return make_result("softmax", probs, (z_t,), backward)


def log_softmax_temperature(logits: Any, tau: float = 1.0) -> Tensor:
    """log(softmax(logits / tau)) along the last axis."""
    _check_tau(tau)
    z_t = as_tensor(logits)
    z = z_t.data / tau
    shifted = z - z.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(log_probs)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return ((g - probs * g.sum(axis=-1, keepdims=True)) / tau,)

    return make_result("log_softmax", log_probs, (z_t,), backward)


def _check_distribution(name: str, values: np.ndarray) -> None:
    if (values < 0).any():
        raise ValueError(f"{name} has negative entries")
    sums = values.sum(axis=-1)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=1e-6):
        raise ValueError(f"{name} does not sum to 1 (sums: {np.round(sums, 8)})")


def kl_divergence(p: Any, q: Any, eps: float = KL_EPSILON) -> Tensor:
    """
    KL(p || q) along the last axis, natural log.

    0 * ln 0 = 0; q is floored at eps before the log. Differentiable in
    both arguments.

    Returns:
        Tensor with the leading (batch) shape of p; scalar for vectors

    Raises:
        ShapeError: Length mismatch
        ValueError: Negative entries or rows not summing to 1
    """
    p_t, q_t = as_tensor(p), as_tensor(q)
    pd, qd = p_t.data, q_t.data
    if pd.shape[-1:] != qd.shape[-1:]:
        raise ShapeError("KL operands differ in length", axis="classes", expected=pd.shape[-1], actual=qd.shape[-1])
    _check_distribution("p", pd)
    _check_distribution("q", qd)

    q_floor = np.maximum(qd, eps)
    positive = pd > 0
    safe_p = np.where(positive, pd, 1.0)
    terms = np.where(positive, pd * (np.log(safe_p) - np.log(q_floor)), 0.0)
    # Round-off and the q floor can push near-identical rows a hair below 0.
    raw = terms.sum(axis=-1)
    clamped = raw < 0.0
    out = np.where(clamped, 0.0, raw)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g = np.expand_dims(np.where(clamped, 0.0, g), -1)
        grad_p = np.where(positive, np.log(safe_p) + 1.0 - np.log(q_floor), 0.0) * g
        grad_q = np.where(qd > eps, -pd / q_floor, 0.0) * g
        return unbroadcast(grad_p, pd.shape), unbroadcast(grad_q, qd.shape)

    return make_result("kl_divergence", out, (p_t, q_t), backward)


def smooth_l1(a: Any, b: Any) -> Tensor:
    """
    Mean Smooth-L1 distance, transition at |d| = 1.

    0.5 * d**2 if |d| < 1 else |d| - 0.5, averaged over all elements.

    Raises:
        ShapeError: Shape mismatch
    """
    a_t, b_t = as_tensor(a), as_tensor(b)
    if a_t.shape != b_t.shape:
        raise ShapeError("smooth_l1 operands differ in shape", axis="elements", expected=a_t.size, actual=b_t.size)
    d = a_t.data - b_t.data
    inside = np.abs(d) < SMOOTH_L1_BETA
    count = max(d.size, 1)
    loss = np.where(inside, 0.5 * d * d / SMOOTH_L1_BETA, np.abs(d) - 0.5 * SMOOTH_L1_BETA).sum() / count

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad = np.where(inside, d / SMOOTH_L1_BETA, np.sign(d)) * g / count
        return grad, -grad

    return make_result("smooth_l1", np.asarray(loss), (a_t, b_t), backward)


def cross_entropy(logits: Any, labels: Sequence[int] | np.ndarray) -> Tensor:
    """
    Mean negative log-softmax probability of the true class.

    Args:
        logits: [batch, C] (or [C] for a single row)
        labels: Class index per row

    Raises:
        ValueError: Label outside [0, C)
        ShapeError: Label count differs from batch size
    """
    z_t = as_tensor(logits)
    z = z_t.data
    unbatched = z.ndim == 1
    z2 = z[np.newaxis] if unbatched else z
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    batch, num_classes = z2.shape
    if y.shape[0] != batch:
        raise ShapeError("label count differs from batch size", axis="batch", expected=batch, actual=y.shape[0])
    if ((y < 0) | (y >= num_classes)).any():
        raise ValueError(f"labels must lie in [0, {num_classes}), got {y.tolist()}")

    shifted = z2 - z2.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    rows = np.arange(batch)
    loss = -log_probs[rows, y].mean()

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.exp(log_probs)
        grad[rows, y] -= 1.0
        grad *= g / batch
        return (grad[0] if unbatched else grad,)

    return make_result("cross_entropy", np.asarray(loss), (z_t,), backward)
