"""
Tensor and Tape.

Dense float64 tensors with tape-based reverse-mode differentiation.

Operations executed while a Tape is active (``with Tape() as tape:``) and
that touch at least one tensor with ``requires_grad`` are recorded on that
tape. Outside an active tape nothing is recorded, which is how teacher
passes and evaluation run without gradient tracking.

Usage:
    w = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        loss = (w * w).sum()
    tape.backward(loss)
    w.grad  # -> array([2., 2., 2.])
"""

import contextvars
import itertools
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from tsd_lab.domain.errors import GradientError, ShapeError

# Receives the gradient of the node output, returns one gradient per parent
# (None where a parent gets nothing).
BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "tsd_lab_active_tape", default=None
)
_TAPE_IDS = itertools.count()


@dataclass
class TapeNode:
    """One recorded operation."""

    op: str
    parents: tuple["Tensor", ...]
    backward: BackwardFn


class Tape:
    """
    Ordered record of differentiable operations.

    Node ids are issued in execution order, so every parent precedes its
    child. A tape is consumed by ``backward``; ``clear`` resets it and
    invalidates every node id issued before.
    """

    def __init__(self) -> None:
        self.tape_id = next(_TAPE_IDS)
        self._nodes: list[TapeNode] = []
        self._generation = 0
        self._consumed = False
        self._tokens: list[contextvars.Token] = []

    def __enter__(self) -> "Tape":
        self._tokens.append(_ACTIVE_TAPE.set(self))
        return self

    def __exit__(self, *exc_info: Any) -> None:
        _ACTIVE_TAPE.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def nodes(self) -> tuple[TapeNode, ...]:
        """Recorded nodes in topological order."""
        return tuple(self._nodes)

    def owns(self, tensor: "Tensor") -> bool:
        """Check whether tensor is a live node of this tape."""
        return (
            tensor.node_id is not None
            and tensor._tape is self
            and tensor._generation == self._generation
        )

    def record(
        self,
        op: str,
        data: np.ndarray,
        parents: tuple["Tensor", ...],
        backward: BackwardFn,
    ) -> "Tensor":
        """Append a node and return its output tensor."""
        if self._consumed:
            raise GradientError("Tape was consumed by backward(); clear() it before a new forward pass")
        out = Tensor(data, requires_grad=True)
        out.node_id = len(self._nodes)
        out._tape = self
        out._generation = self._generation
        self._nodes.append(TapeNode(op=op, parents=parents, backward=backward))
        return out

    def clear(self) -> None:
        """Drop all nodes; previously issued node ids become invalid."""
        self._nodes.clear()
        self._generation += 1
        self._consumed = False

    def backward(self, loss: "Tensor") -> None:
        """
        Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``.

        Args:
            loss: Scalar tensor produced on this tape

        Raises:
            GradientError: Non-scalar loss, foreign node, or repeated call
        """
        if loss.size != 1:
            raise GradientError(f"backward() needs a scalar loss, got shape {loss.shape}")
        if not self.owns(loss):
            raise GradientError("Loss was not produced on this tape (or the tape was cleared)")
        if self._consumed:
            raise GradientError("backward() already ran on this forward pass")
        if not np.isfinite(loss.data).all():
            raise GradientError(f"Loss is not finite: {loss.data}")
        self._consumed = True

        pending: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
        for node_id in range(loss.node_id, -1, -1):
            grad = pending.pop(node_id, None)
            if grad is None:
                continue
            node = self._nodes[node_id]
            for parent, parent_grad in zip(node.parents, node.backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if self.owns(parent):
                    previous = pending.get(parent.node_id)
                    pending[parent.node_id] = parent_grad if previous is None else previous + parent_grad
                elif parent.node_id is None:
                    parent._accumulate(parent_grad)
                else:
                    raise GradientError(f"Node '{node.op}' depends on a tensor from another tape")


def active_tape() -> Tape | None:
    """Return the tape recording in the current context, if any."""
    return _ACTIVE_TAPE.get()


def as_tensor(value: Any) -> "Tensor":
    """Wrap arrays and scalars; pass tensors through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def make_result(
    op: str,
    data: np.ndarray,
    parents: tuple["Tensor", ...],
    backward: BackwardFn,
) -> "Tensor":
    """Record on the active tape when any parent needs gradients."""
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(p.requires_grad for p in parents):
        return tape.record(op, data, parents, backward)
    return Tensor(data)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Shape-tagged float64 array that can take part in a Tape."""

    __array_priority__ = 100

    def __init__(self, data: Any, requires_grad: bool = False) -> None:
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.node_id: int | None = None
        self._tape: Tape | None = None
        self._generation = -1

    # ------------------------------------------------------------------
    # Introspection
    # ------------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def values(self) -> np.ndarray:
        """Row-major flat view of the data."""
        return self.data.ravel()

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = unbroadcast(grad, self.shape)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # ------------------------------------------------------------------
    # Elementwise arithmetic (broadcasting)
    # ------------------------------------------------------------------

    def __add__(self, other: Any) -> "Tensor":
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            return unbroadcast(g, a_shape), unbroadcast(g, b_shape)

        return make_result("add", self.data + other.data, (self, other), backward)

    def __radd__(self, other: Any) -> "Tensor":
        return self + other

    def __sub__(self, other: Any) -> "Tensor":
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            return unbroadcast(g, a_shape), unbroadcast(-g, b_shape)

        return make_result("sub", self.data - other.data, (self, other), backward)

    def __rsub__(self, other: Any) -> "Tensor":
        return as_tensor(other) - self

    def __mul__(self, other: Any) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            return unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)

        return make_result("mul", a * b, (self, other), backward)

    def __rmul__(self, other: Any) -> "Tensor":
        return self * other

    def __truediv__(self, other: Any) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            return unbroadcast(g / b, a.shape), unbroadcast(-g * a / (b * b), b.shape)

        return make_result("div", a / b, (self, other), backward)

    def __rtruediv__(self, other: Any) -> "Tensor":
        return as_tensor(other) / self

    def __neg__(self) -> "Tensor":
        return make_result("neg", -self.data, (self,), lambda g: (-g,))

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise TypeError("Only constant exponents are supported")
        a = self.data

        def backward(g: np.ndarray) -> tuple[np.ndarray]:
            return (g * exponent * a ** (exponent - 1),)

        return make_result("pow", a**exponent, (self,), backward)

    def __matmul__(self, other: Any) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError("matmul needs operands with at least 2 dimensions", axis="ndim")
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError("matmul inner dimensions differ", axis="inner", expected=a.shape[-1], actual=b.shape[-2])

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            grad_a = g @ np.swapaxes(b, -1, -2)
            grad_b = np.swapaxes(a, -1, -2) @ g
            return unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)

        return make_result("matmul", a @ b, (self, other), backward)

    # ------------------------------------------------------------------
    # Reductions and shape manipulation
    # ------------------------------------------------------------------

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> "Tensor":
        shape = self.shape

        def backward(g: np.ndarray) -> tuple[np.ndarray]:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return make_result("sum", self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return make_result("reshape", self.data.reshape(shape), (self,), lambda g: (g.reshape(original),))

    def transpose(self, *axes: int) -> "Tensor":
        order = axes or tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(order))
        return make_result("transpose", self.data.transpose(order), (self,), lambda g: (g.transpose(inverse),))

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def __getitem__(self, index: Any) -> "Tensor":
        if isinstance(index, Tensor):
            index = index.data.astype(np.int64)
        shape = self.shape

        def backward(g: np.ndarray) -> tuple[np.ndarray]:
            full = np.zeros(shape, dtype=np.float64)
            np.add.at(full, index, g)
            return (full,)

        return make_result("getitem", self.data[index], (self,), backward)

    # ------------------------------------------------------------------
    # Pointwise functions
    # ------------------------------------------------------------------

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return make_result("exp", out, (self,), lambda g: (g * out,))

    def log(self) -> "Tensor":
        a = self.data
        return make_result("log", np.log(a), (self,), lambda g: (g / a,))

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return make_result("tanh", out, (self,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self) -> "Tensor":
        a = self.data
        out = np.where(a >= 0, 1.0 / (1.0 + np.exp(-np.abs(a))), np.exp(-np.abs(a)) / (1.0 + np.exp(-np.abs(a))))
        return make_result("sigmoid", out, (self,), lambda g: (g * out * (1.0 - out),))

    def relu(self) -> "Tensor":
        mask = self.data > 0
        return make_result("relu", np.where(mask, self.data, 0.0), (self,), lambda g: (g * mask,))

    def abs(self) -> "Tensor":
        sign = np.sign(self.data)
        return make_result("abs", np.abs(self.data), (self,), lambda g: (g * sign,))

    def clamp_min(self, floor: float) -> "Tensor":
        """Elementwise max(x, floor); gradient flows where x > floor."""
        mask = self.data > floor
        return make_result("clamp_min", np.where(mask, self.data, floor), (self,), lambda g: (g * mask,))
