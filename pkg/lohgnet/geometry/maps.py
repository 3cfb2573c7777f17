"""
Per-pixel Lorentz operations over feature maps.

A ``LorentzFeatureMap`` stores a B x (1+C) x H x W tensor whose channel 0 is
the time component and channels 1..C the space component of one Lorentz
point per pixel.

Two families live here:

* differentiable builders used inside the network (``from_spatial``,
  ``project_map``, ``log_map_spatial``), written with ``numerics.ops`` so
  gradients flow through the space channels;
* array-level batched variants of the point API (``inner_map``,
  ``distance_map``, ``log_map``, ``exp_map``), which call the same kernels
  as ``lohgnet.geometry.lorentz`` along the channel axis.
"""

from dataclasses import dataclass

import numpy as np

from lohgnet.core.constants import LOG_MAP_ZERO_NORM
from lohgnet.core.errors import ContractError, DimensionError
from lohgnet.geometry import lorentz
from lohgnet.numerics import ops
from lohgnet.numerics.tensor import Tensor

CHANNEL_AXIS = 1

# Series of arsinh(u)/u in w = u^2 and of its derivative, used below WSERIES.
_GAIN_SERIES = (1.0, -1.0 / 6.0, 3.0 / 40.0, -5.0 / 112.0, 35.0 / 1152.0)
_WSERIES = 1e-2


# ========================================
# Feature Map Type
# ========================================

@dataclass(frozen=True)
class LorentzFeatureMap:
    """
    Lorentz points over a channel axis.

    Attributes:
        data: B x (1+C) x H x W tensor, channel 0 temporal
        k: Manifold constant
    """

    data: Tensor
    k: float = 1.0

    def __post_init__(self) -> None:
        if self.data.ndim != 4 or self.data.shape[CHANNEL_AXIS] < 2:
            raise DimensionError(
                f"Lorentz feature maps need B x (1+C) x H x W with C >= 1, got {self.data.shape}"
            )
        if not self.k > 0:
            raise ContractError(f"curvature must be positive, got {self.k}")

    @property
    def shape(self):
        return self.data.shape

    @property
    def spatial_channels(self) -> int:
        return self.data.shape[CHANNEL_AXIS] - 1

    @property
    def time(self) -> Tensor:
        return ops.narrow(self.data, CHANNEL_AXIS, 0, 1)

    @property
    def space(self) -> Tensor:
        return ops.narrow(self.data, CHANNEL_AXIS, 1, self.spatial_channels)

    def residual(self) -> float:
        """Max over pixels of ``|<x,x>_L + k|`` (measured in 64-bit)."""
        x = self.data.data.astype(np.float64)
        return float(np.max(np.abs(lorentz.inner(x, x, axis=CHANNEL_AXIS) + self.k)))

    def min_time(self) -> float:
        return float(np.min(self.data.data[:, 0]))


# ========================================
# Differentiable Builders
# ========================================

def time_channel(space: Tensor, k: float) -> Tensor:
    """
    Differentiable ``t = sqrt(k + |s|^2)`` over the channel axis, B x 1 x H x W.

    Shares ``lorentz.time_component`` with the point API (squared norm
    clamped at zero, accumulated in 64-bit). Backward: dt/ds = s / t.
    """
    t = lorentz.time_component(space.data, k, axis=CHANNEL_AXIS)

    def backward(g):
        return (g * space.data / t,)

    return Tensor.from_op(t, (space,), backward, "reconstruct_time")


def from_spatial(space: Tensor, k: float) -> LorentzFeatureMap:
    """Attach the reconstructed temporal channel to space channels."""
    if space.ndim != 4:
        raise DimensionError(f"expected B x C x H x W space channels, got {space.shape}")
    return LorentzFeatureMap(ops.concat([time_channel(space, k), space], axis=CHANNEL_AXIS), k)


def project_map(raw: Tensor, k: float) -> LorentzFeatureMap:
    """Per-pixel ``project_to_manifold``: drop channel 0, rebuild it."""
    if raw.ndim != 4 or raw.shape[CHANNEL_AXIS] < 2:
        raise DimensionError(f"expected B x (1+C) x H x W with C >= 1, got {raw.shape}")
    return from_spatial(ops.narrow(raw, CHANNEL_AXIS, 1, raw.shape[CHANNEL_AXIS] - 1), k)


def _gain_forward(w: np.ndarray) -> np.ndarray:
    u = np.sqrt(np.maximum(w, _WSERIES))
    closed = np.arcsinh(u) / u
    series = np.polynomial.polynomial.polyval(w, _GAIN_SERIES)
    return np.where(w < _WSERIES, series, closed)


def _gain_derivative(w: np.ndarray) -> np.ndarray:
    """d/dw of arsinh(sqrt(w))/sqrt(w)."""
    u = np.sqrt(np.maximum(w, _WSERIES))
    closed = (u / np.sqrt(1 + u * u) - np.arcsinh(u)) / (2 * u ** 3)
    coefficients = [n * c for n, c in enumerate(_GAIN_SERIES)][1:]
    series = np.polynomial.polynomial.polyval(w, coefficients)
    return np.where(w < _WSERIES, series, closed)


def log_gain(sq_norm: Tensor, k: float) -> Tensor:
    """
    Scale factor ``d(o,x) / |x_s|`` as a smooth function of ``|x_s|^2``.

    With ``u = |x_s| / sqrt(k)`` the factor is ``arsinh(u) / u``; it tends to
    1 at the origin, where a short series replaces the closed form.
    """
    w = sq_norm.data.astype(np.float64) / k
    out = _gain_forward(w).astype(sq_norm.dtype)
    slope = (_gain_derivative(w) / k).astype(sq_norm.dtype)

    def backward(g):
        return (g * slope,)

    return Tensor.from_op(out, (sq_norm,), backward, "log_gain")


def log_map_spatial(x: LorentzFeatureMap) -> Tensor:
    """
    Space channels of the per-pixel logarithmic map at the origin.

    Differentiable in the space channels. Pixels whose space norm is below
    the zero-norm cutoff map to exactly zero.
    """
    space = x.space
    sq_norm = ops.sum(ops.square(space), axis=CHANNEL_AXIS, keepdims=True)
    keep = (sq_norm.data >= LOG_MAP_ZERO_NORM ** 2).astype(space.dtype)
    gain = ops.mul(log_gain(sq_norm, x.k), Tensor(keep, dtype=space.dtype))
    return ops.mul(space, gain)


# ========================================
# Batched Point Operations (arrays)
# ========================================

def inner_map(x: LorentzFeatureMap, y: LorentzFeatureMap) -> np.ndarray:
    """Per-pixel Lorentz inner product, B x H x W."""
    return lorentz.inner(x.data.data, y.data.data, axis=CHANNEL_AXIS)


def reconstruct_map(space: np.ndarray, k: float) -> LorentzFeatureMap:
    """Array-level per-pixel ``reconstruct_time``."""
    space = np.asarray(space)
    if space.ndim != 4:
        raise DimensionError(f"expected B x C x H x W, got {space.shape}")
    return LorentzFeatureMap(Tensor(lorentz.reconstruct(space, k, axis=CHANNEL_AXIS), dtype=space.dtype), k)


def distance_map(x: LorentzFeatureMap) -> np.ndarray:
    """Per-pixel geodesic distance from the origin, B x H x W."""
    return lorentz.distance0(x.data.data, x.k, axis=CHANNEL_AXIS)


def log_map(x: LorentzFeatureMap) -> np.ndarray:
    """Per-pixel tangent vectors at the origin, B x (1+C) x H x W."""
    return lorentz.log0(x.data.data, x.k, axis=CHANNEL_AXIS)


def exp_map(v: np.ndarray, k: float) -> LorentzFeatureMap:
    """Per-pixel exponential map of tangent vectors laid out B x (1+C) x H x W."""
    v = np.asarray(v)
    if v.ndim != 4 or v.shape[CHANNEL_AXIS] < 2:
        raise DimensionError(f"expected B x (1+C) x H x W with C >= 1, got {v.shape}")
    return LorentzFeatureMap(Tensor(lorentz.exp0(v, k, axis=CHANNEL_AXIS), dtype=v.dtype), k)
