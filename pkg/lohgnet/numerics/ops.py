"""
Differentiable operations on ``Tensor``.

The op set is exactly what the network needs: matrix product, 2-D
convolution, pointwise functions, reductions, global average pooling,
channel slicing/concatenation, bilinear x2 upsampling and instance
normalization (composed from the primitives).

Broadcasting is deliberately narrow: a binary op accepts equal shapes, a
single-element operand, or two operands of equal rank where one shape
dominates the other and differs only by unit extents (per-channel or
per-item statistics against a full map). Anything else is a
``DimensionError``.
"""

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lohgnet.core.constants import LEAKY_SLOPE, NORM_EPS, Elementwise
from lohgnet.core.errors import ContractError, DimensionError
from lohgnet.numerics.tensor import Tensor

Operand = Union[Tensor, float, int]
Axis = Optional[Union[int, Tuple[int, ...]]]


# ========================================
# Broadcasting Helpers
# ========================================

def _pair(a: Operand, b: Operand) -> Tuple[Tensor, Tensor]:
    """Promote python scalars to constant tensors of the partner's dtype."""
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        raise ContractError("at least one operand must be a Tensor")
    if not isinstance(a, Tensor):
        a = Tensor(a, dtype=b.dtype)
    if not isinstance(b, Tensor):
        b = Tensor(b, dtype=a.dtype)
    if a.dtype != b.dtype:
        raise ContractError(f"dtype mismatch: {a.dtype.name} vs {b.dtype.name}")
    return a, b


def broadcast_shape(a: Tuple[int, ...], b: Tuple[int, ...], op: str) -> Tuple[int, ...]:
    if a == b:
        return a
    if math.prod(b) == 1 and len(b) <= len(a):
        return a
    if math.prod(a) == 1 and len(a) <= len(b):
        return b
    if len(a) != len(b):
        raise DimensionError(f"{op}: cannot broadcast {a} with {b} (rank differs)")
    for da, db in zip(a, b):
        if da != db and 1 not in (da, db):
            raise DimensionError(f"{op}: cannot broadcast {a} with {b}")
    out = tuple(max(da, db) for da, db in zip(a, b))
    if out not in (a, b):
        raise DimensionError(f"{op}: mutual broadcast of {a} and {b} is not supported")
    return out


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of the broadcast above)."""
    if grad.shape == shape:
        return grad
    if math.prod(shape) == 1:
        return np.asarray(grad.sum()).reshape(shape)
    axes = tuple(
        i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1
    )
    return grad.sum(axis=axes, keepdims=True)


# ========================================
# Binary Pointwise
# ========================================

def add(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    broadcast_shape(a.shape, b.shape, "add")

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), backward, "add")


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    broadcast_shape(a.shape, b.shape, "sub")

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), backward, "sub")


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    broadcast_shape(a.shape, b.shape, "mul")

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), backward, "mul")


def div(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    broadcast_shape(a.shape, b.shape, "div")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data

    def backward(g):
        return (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return Tensor.from_op(out, (a, b), backward, "div")


def scale(x: Tensor, factor: float) -> Tensor:
    factor = x.dtype.type(factor)

    def backward(g):
        return (g * factor,)

    return Tensor.from_op(x.data * factor, (x,), backward, "scale")


# ========================================
# Unary Pointwise
# ========================================

def relu(x: Tensor) -> Tensor:
    positive = x.data > 0

    def backward(g):
        return (g * positive,)

    return Tensor.from_op(np.where(positive, x.data, 0).astype(x.dtype), (x,), backward, "relu")


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    slope = x.dtype.type(slope)
    factor = np.where(x.data > 0, x.dtype.type(1), slope).astype(x.dtype)

    def backward(g):
        return (g * factor,)

    return Tensor.from_op(x.data * factor, (x,), backward, "leaky_relu")


def sigmoid(x: Tensor) -> Tensor:
    e = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1 / (1 + e), e / (1 + e)).astype(x.dtype)

    def backward(g):
        return (g * out * (1 - out),)

    return Tensor.from_op(out, (x,), backward, "sigmoid")


def sqrt(x: Tensor) -> Tensor:
    with np.errstate(invalid="ignore"):
        out = np.sqrt(x.data)

    def backward(g):
        with np.errstate(divide="ignore"):
            return (g * 0.5 / out,)

    return Tensor.from_op(out, (x,), backward, "sqrt")


def square(x: Tensor) -> Tensor:
    def backward(g):
        return (2 * g * x.data,)

    return Tensor.from_op(x.data * x.data, (x,), backward, "square")


def absolute(x: Tensor) -> Tensor:
    sign = np.sign(x.data)

    def backward(g):
        return (g * sign,)

    return Tensor.from_op(np.abs(x.data), (x,), backward, "abs")


def clamp_min(x: Tensor, low: float) -> Tensor:
    """max(x, low); gradient passes where the input is at or above ``low``."""
    keep = x.data >= low

    def backward(g):
        return (g * keep,)

    return Tensor.from_op(np.maximum(x.data, x.dtype.type(low)), (x,), backward, "clamp_min")


def elementwise(
    x: Tensor,
    fn: Elementwise,
    other: Optional[Operand] = None,
    factor: Optional[float] = None,
) -> Tensor:
    """
    Apply one of the pointwise functions by name.

    Args:
        x: Input tensor
        fn: Function selector
        other: Second operand for add/mul/sub
        factor: Constant for scale (and slope override for leaky_relu)
    """
    fn = Elementwise(fn)
    if fn == Elementwise.RELU:
        return relu(x)
    if fn == Elementwise.LEAKY_RELU:
        return leaky_relu(x, LEAKY_SLOPE if factor is None else factor)
    if fn == Elementwise.SIGMOID:
        return sigmoid(x)
    if fn == Elementwise.SCALE:
        if factor is None:
            raise ContractError("scale needs a factor")
        return scale(x, factor)
    if other is None:
        raise ContractError(f"{fn.value} needs a second operand")
    return {Elementwise.ADD: add, Elementwise.MUL: mul, Elementwise.SUB: sub}[fn](x, other)


# ========================================
# Reductions
# ========================================

def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(a % ndim for a in axes)


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _normalize_axes(axis, x.ndim)
    kept_shape = tuple(1 if i in axes else n for i, n in enumerate(x.shape))

    def backward(g):
        return (np.broadcast_to(np.reshape(g, kept_shape), x.shape),)

    out = np.asarray(x.data.sum(axis=axes, keepdims=keepdims), dtype=x.dtype)
    return Tensor.from_op(out, (x,), backward, "sum")


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    count = math.prod(x.shape[a] for a in axes)
    return scale(sum(x, axis=axes, keepdims=keepdims), 1.0 / count)


def gap(x: Tensor) -> Tensor:
    """Global average pooling: B x C x H x W -> B x C x 1 x 1."""
    if x.ndim != 4:
        raise DimensionError(f"gap expects B x C x H x W, got {x.shape}")
    count = x.shape[2] * x.shape[3]

    def backward(g):
        return (np.broadcast_to(g / count, x.shape),)

    out = x.data.mean(axis=(2, 3), keepdims=True, dtype=x.dtype)
    return Tensor.from_op(out, (x,), backward, "gap")


# ========================================
# Shape Manipulation
# ========================================

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if math.prod(shape) != x.size:
        raise DimensionError(f"cannot reshape {x.shape} to {shape}")

    def backward(g):
        return (np.reshape(g, x.shape),)

    return Tensor.from_op(x.data.reshape(shape), (x,), backward, "reshape")


def transpose(x: Tensor) -> Tensor:
    """Swap the two axes of a matrix."""
    if x.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got {x.shape}")

    def backward(g):
        return (g.T,)

    return Tensor.from_op(x.data.T, (x,), backward, "transpose")


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice ``[start, start + length)`` along ``axis``."""
    axis %= x.ndim
    if start < 0 or length < 1 or start + length > x.shape[axis]:
        raise DimensionError(
            f"narrow [{start}, {start + length}) out of range for axis {axis} of {x.shape}"
        )
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def backward(g):
        full = np.zeros(x.shape, dtype=x.dtype)
        full[index] = g
        return (full,)

    return Tensor.from_op(x.data[index], (x,), backward, "narrow")


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    axis %= ndim
    for t in tensors[1:]:
        same = all(t.shape[i] == tensors[0].shape[i] for i in range(ndim) if i != axis)
        if t.ndim != ndim or not same:
            raise DimensionError(f"concat: incompatible shapes {tensors[0].shape} and {t.shape}")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
            for i in range(len(tensors))
        )

    out = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor.from_op(out, tuple(tensors), backward, "concat")


# ========================================
# Linear Algebra
# ========================================

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of an m x k and a k x n tensor."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects matrices, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    if a.dtype != b.dtype:
        raise ContractError(f"dtype mismatch: {a.dtype.name} vs {b.dtype.name}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor.from_op(a.data @ b.data, (a, b), backward, "matmul")


def conv2d(
    x: Tensor,
    w: Tensor,
    b: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """
    Cross-correlation with zero padding.

    Args:
        x: Input, B x C x H x W
        w: Kernel, O x C x kh x kw
        b: Bias of length O (optional)
        stride: Step between output positions (>= 1)
        padding: Zero rows/columns added on every side

    Returns:
        B x O x H' x W' with H' = floor((H + 2p - kh) / stride) + 1
    """
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"conv2d expects 4-D input and kernel, got {x.shape}, {w.shape}")
    batch, channels, height, width = x.shape
    out_channels, kernel_channels, kh, kw = w.shape
    if channels != kernel_channels:
        raise DimensionError(f"conv2d: input has {channels} channels, kernel expects {kernel_channels}")
    if stride < 1 or padding < 0:
        raise ContractError(f"conv2d: stride must be >= 1 and padding >= 0 (got {stride}, {padding})")
    if b is not None and b.shape != (out_channels,):
        raise DimensionError(f"conv2d: bias shape {b.shape} does not match {out_channels} outputs")

    padded_h, padded_w = height + 2 * padding, width + 2 * padding
    if kh > padded_h or kw > padded_w:
        raise DimensionError(
            f"conv2d: kernel {kh}x{kw} larger than padded input {padded_h}x{padded_w}"
        )
    out_h = (padded_h - kh) // stride + 1
    out_w = (padded_w - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.einsum("bchwij,ocij->bohw", windows, w.data, optimize=True)
    if b is not None:
        out = out + b.data.reshape(1, out_channels, 1, 1)
    out = out.astype(x.dtype, copy=False)

    def backward(g):
        grad_w = np.einsum("bchwij,bohw->ocij", windows, g, optimize=True)
        grad_xp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                grad_xp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += np.einsum(
                    "bohw,oc->bchw", g, w.data[:, :, i, j], optimize=True
                )
        grad_x = grad_xp[:, :, padding:padding + height, padding:padding + width]
        grad_b = g.sum(axis=(0, 2, 3)) if b is not None else None
        return grad_x, grad_w, grad_b

    parents = (x, w) if b is None else (x, w, b)
    return Tensor.from_op(out, parents, lambda g: backward(g)[: len(parents)], "conv2d")


# ========================================
# Resampling
# ========================================

def _bilinear_matrix(size: int, dtype) -> np.ndarray:
    """2n x n interpolation weights, half-pixel centres, edge clamped."""
    out = np.zeros((2 * size, size), dtype=dtype)
    for o in range(2 * size):
        src = max((o + 0.5) / 2 - 0.5, 0.0)
        i0 = min(int(math.floor(src)), size - 1)
        i1 = min(i0 + 1, size - 1)
        frac = src - i0
        out[o, i0] += 1 - frac
        out[o, i1] += frac
    return out


def upsample2x(x: Tensor) -> Tensor:
    """Bilinear x2 upsampling of a B x C x H x W map."""
    if x.ndim != 4:
        raise DimensionError(f"upsample2x expects B x C x H x W, got {x.shape}")
    uh = _bilinear_matrix(x.shape[2], x.dtype)
    uw = _bilinear_matrix(x.shape[3], x.dtype)

    def backward(g):
        return (np.einsum("ij,bcil,lk->bcjk", uh, g, uw, optimize=True),)

    out = np.einsum("ij,bcjk,lk->bcil", uh, x.data, uw, optimize=True)
    return Tensor.from_op(out, (x,), backward, "upsample2x")


# ========================================
# Composites
# ========================================

def instance_norm(x: Tensor, eps: float = NORM_EPS) -> Tensor:
    """Normalize every (item, channel) map to zero mean and unit variance."""
    if x.ndim != 4:
        raise DimensionError(f"instance_norm expects B x C x H x W, got {x.shape}")
    centered = sub(x, mean(x, axis=(2, 3), keepdims=True))
    variance = mean(square(centered), axis=(2, 3), keepdims=True)
    return div(centered, sqrt(add(variance, eps)))
