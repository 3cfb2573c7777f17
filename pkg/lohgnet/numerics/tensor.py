"""
Dense tensors with reverse-mode gradients.

A ``Tensor`` wraps a read-only numpy array. Operations in
``lohgnet.numerics.ops`` build new tensors and, when any input requires a
gradient, remember their inputs and a backward rule. ``backward(loss)``
records the ``Tape`` of those operations in topological order and replays it
in reverse, accumulating gradients into the leaves.

Every public operation checks its output for NaN/Inf and raises
``NumericError`` naming the operation.
"""

import logging
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from lohgnet.config import settings
from lohgnet.core.constants import Precision
from lohgnet.core.errors import ContractError, DimensionError, NumericError

logger = logging.getLogger(__name__)

DTYPES = {
    Precision.F32: np.float32,
    Precision.F64: np.float64,
}

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_precision: ContextVar[Optional[Precision]] = ContextVar("lohg_precision", default=None)
_grad_enabled: ContextVar[bool] = ContextVar("lohg_grad_enabled", default=True)


# ========================================
# Precision & Gradient Mode
# ========================================

def current_precision() -> Precision:
    """Precision in effect: innermost ``precision()`` block, else settings."""
    return _precision.get() or settings.precision


def current_dtype() -> type:
    return DTYPES[current_precision()]


@contextmanager
def precision(value: Precision) -> Iterator[None]:
    """
    Select the tensor precision for new tensors inside the block.

    Usage:
        with precision(Precision.F64):
            x = Tensor(np.ones(3))   # float64
    """
    token = _precision.set(Precision(value))
    try:
        yield
    finally:
        _precision.reset(token)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording (inference and finite differences)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


def ensure_finite(array: np.ndarray, op: str) -> None:
    """Raise ``NumericError`` if ``array`` holds NaN or Inf."""
    if not np.all(np.isfinite(array)):
        raise NumericError(op)


# ========================================
# Tensor
# ========================================

class Tensor:
    """
    Immutable dense array with an optional gradient slot.

    Attributes:
        requires_grad: Whether gradients flow to (or through) this tensor
        grad: Accumulated gradient, same shape as the data (leaves only)
        op: Name of the operation that produced the tensor ("leaf" for inputs)
    """

    __slots__ = ("_data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype: Optional[type] = None):
        array = np.array(data, dtype=dtype or current_dtype())
        if 0 in array.shape:
            raise DimensionError(f"tensor extents must be positive, got {array.shape}")
        ensure_finite(array, "tensor")
        array.flags.writeable = False

        self._data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.op = "leaf"
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward: BackwardFn,
        op: str,
    ) -> "Tensor":
        """
        Wrap the result of an operation and register its backward rule.

        Args:
            data: Output array (ownership passes to the tensor)
            parents: Input tensors, in the order ``backward`` returns grads
            backward: Maps the output gradient to one gradient per parent
            op: Operation name used in errors and logs
        """
        ensure_finite(data, op)
        data = np.asarray(data)
        data.flags.writeable = False

        out = object.__new__(cls)
        out._data = data
        out.grad = None
        out.op = op
        track = is_grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    # ----------------------------------------
    # Array views
    # ----------------------------------------

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def dtype(self) -> np.dtype:
        return self._data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        """Writable copy of the data."""
        return self._data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self._data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self._data, dtype=self.dtype)

    # ----------------------------------------
    # Gradients
    # ----------------------------------------

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """Add ``grad`` to the gradient slot (the only in-place mutation)."""
        grad = np.asarray(grad, dtype=self.dtype).reshape(self.shape)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> "Tape":
        return backward(self)

    # ----------------------------------------
    # Operators (delegate to ops)
    # ----------------------------------------

    def __add__(self, other):
        return _ops().add(self, other)

    def __radd__(self, other):
        return _ops().add(other, self)

    def __sub__(self, other):
        return _ops().sub(self, other)

    def __rsub__(self, other):
        return _ops().sub(other, self)

    def __mul__(self, other):
        return _ops().mul(self, other)

    def __rmul__(self, other):
        return _ops().mul(other, self)

    def __truediv__(self, other):
        return _ops().div(self, other)

    def __rtruediv__(self, other):
        return _ops().div(other, self)

    def __neg__(self):
        return _ops().scale(self, -1.0)

    def __matmul__(self, other):
        return _ops().matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return _ops().sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return _ops().mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops().reshape(self, shape)

    @property
    def T(self) -> "Tensor":
        return _ops().transpose(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, op={self.op!r}{flag})"


def _ops():
    from lohgnet.numerics import ops

    return ops


# ========================================
# Tape
# ========================================

class Tape:
    """
    Ordered record of the differentiable operations behind one output.

    ``nodes`` is a topological order (every node after all of its inputs);
    ``replay`` walks it in exact reverse, so gradient accumulation order is
    fixed for a fixed execution.
    """

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    @classmethod
    def record(cls, output: Tensor) -> "Tape":
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]

        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        return cls(order)

    def replay(self, seed: np.ndarray) -> None:
        """Propagate ``seed`` (d output / d output) back to every leaf."""
        grads: Dict[int, np.ndarray] = {id(self.nodes[-1]): seed}

        for node in reversed(self.nodes):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.is_leaf:
                node.accumulate_grad(grad)
                continue

            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                ensure_finite(parent_grad, f"{node.op} (backward)")
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    def __len__(self) -> int:
        return len(self.nodes)


def backward(loss: Tensor) -> Tape:
    """
    Populate ``grad`` of every leaf that requires it with d loss / d leaf.

    Raises:
        ContractError: If ``loss`` is not a scalar or is not on a tape
    """
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tensor that requires grad")

    tape = Tape.record(loss)
    logger.debug("backward over %d tape nodes", len(tape))
    tape.replay(np.ones(loss.shape, dtype=loss.dtype))
    return tape
