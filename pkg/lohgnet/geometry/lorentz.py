"""
Lorentz-model primitives on single points.

A point is laid out ``[time, space...]`` and lives on the upper sheet of
the hyperboloid ``<x, x>_L = -k`` with ``time > 0``. Only maps at the origin
``o = (sqrt(k), 0, ..., 0)`` are provided.

The array kernels (``inner``, ``reconstruct``, ``log0``, ``exp0``,
``distance0``) take an ``axis`` argument naming the coordinate axis, so the
per-pixel variants in ``lohgnet.geometry.maps`` run the very same code.
"""

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from lohgnet.core.constants import LOG_MAP_ZERO_NORM, MANIFOLD_EPS, Precision
from lohgnet.core.errors import ContractError, DimensionError, NumericError


# ========================================
# Domain Types
# ========================================

@dataclass(frozen=True)
class Curvature:
    """Manifold constant k > 0 (unit curvature by default)."""

    k: float = 1.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.k) and self.k > 0):
            raise ContractError(f"curvature must be a positive finite number, got {self.k}")

    @property
    def sqrt_k(self) -> float:
        return float(np.sqrt(self.k))


def manifold_eps(dtype) -> float:
    """Tolerance on ``|<x,x>_L + k|`` for the given floating dtype."""
    return MANIFOLD_EPS[Precision.F64 if np.dtype(dtype) == np.float64 else Precision.F32]


@dataclass(frozen=True)
class LorentzPoint:
    """
    Point ``[t, s]`` on the hyperboloid of curvature ``k``.

    Construction does not re-project; call ``validate()`` to assert the
    manifold constraint.
    """

    t: float
    s: np.ndarray
    k: Curvature = field(default_factory=Curvature)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.t], np.asarray(self.s)]).astype(np.asarray(self.s).dtype)

    @property
    def dim(self) -> int:
        return int(np.asarray(self.s).size)

    def residual(self) -> float:
        v = self.vector.astype(np.float64)
        return float(abs(inner(v, v) + self.k.k))

    def validate(self) -> "LorentzPoint":
        if self.t <= 0:
            raise ContractError(f"time component must be positive, got {self.t}")
        if self.residual() > manifold_eps(np.asarray(self.s).dtype):
            raise ContractError(f"point is off the manifold (residual {self.residual():.3e})")
        return self


@dataclass(frozen=True)
class TangentVector:
    """Tangent vector at the origin, laid out ``[time, space...]``."""

    v: np.ndarray
    k: Curvature = field(default_factory=Curvature)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.v))


def origin(dim: int, k: Curvature = Curvature(), dtype=np.float64) -> LorentzPoint:
    """Origin ``o = (sqrt(k), 0)`` with ``dim`` spatial coordinates."""
    return LorentzPoint(t=float(np.sqrt(k.k)), s=np.zeros(dim, dtype=dtype), k=k)


# ========================================
# Array Kernels
# ========================================

def _check_finite(array: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NumericError(op)


def _time(x: np.ndarray, axis: int) -> np.ndarray:
    return np.take(x, [0], axis=axis)


def _space(x: np.ndarray, axis: int) -> np.ndarray:
    return np.take(x, np.arange(1, x.shape[axis]), axis=axis)


def inner(x: np.ndarray, y: np.ndarray, axis: int = 0) -> np.ndarray:
    """Lorentz inner product ``-x_t y_t + x_s . y_s`` along ``axis``."""
    if x.shape != y.shape:
        raise DimensionError(f"lorentz inner: shapes differ {x.shape} vs {y.shape}")
    product = x * y
    return np.sum(_space(product, axis), axis=axis) - np.take(product, 0, axis=axis)


def time_component(s: np.ndarray, k: float, axis: int = 0) -> np.ndarray:
    """
    ``sqrt(k + |s|^2)`` along ``axis`` (kept as a unit axis), in the dtype of ``s``.

    The squared norm is accumulated in 64-bit and clamped at zero, so the
    only rounding left in 32-bit mode is the final cast of ``t``.
    """
    _check_finite(s, "reconstruct_time")
    sq_norm = np.maximum(np.sum(np.square(s, dtype=np.float64), axis=axis, keepdims=True), 0)
    return np.sqrt(k + sq_norm).astype(s.dtype, copy=False)


def reconstruct(s: np.ndarray, k: float, axis: int = 0) -> np.ndarray:
    """Prepend ``t = sqrt(k + |s|^2)`` to spatial coordinates along ``axis``."""
    return np.concatenate([time_component(s, k, axis), s], axis=axis)


def distance0(x: np.ndarray, k: float, axis: int = 0) -> np.ndarray:
    """
    Geodesic distance from the origin.

    Evaluated as ``sqrt(k) arsinh(|x_s| / sqrt(k))``, which equals
    ``sqrt(k) arcosh(-<o,x>_L / k)`` on the manifold (time reconstructed from
    space) and keeps full relative accuracy near the origin, where a stored
    32-bit time component has already lost the information.
    """
    sqrt_k = np.sqrt(k)
    norm = np.sqrt(np.sum(_space(x, axis) ** 2, axis=axis))
    return sqrt_k * np.arcsinh(norm / sqrt_k)


def distance0_from_time(x: np.ndarray, k: float, axis: int = 0) -> np.ndarray:
    """
    Time-based form ``sqrt(k) arcosh(max(1, -<o,x>_L / k))``.

    Reads only the time slot, so it stays defined for points whose stored
    time disagrees with their space part.
    """
    sqrt_k = np.sqrt(k)
    # -<o, x>_L = sqrt(k) x_t
    argument = np.maximum(np.take(x, 0, axis=axis) * sqrt_k / k, 1.0)
    return sqrt_k * np.arccosh(argument)


def log0(x: np.ndarray, k: float, axis: int = 0) -> np.ndarray:
    """
    Logarithmic map at the origin.

    The tangent direction ``v = x + <o,x>_L o / k`` has a zero time slot and
    spatial part ``x_s``; the result is ``d(o,x) v / |v|``, and exactly zero
    where ``|v|`` falls below the zero-norm cutoff.
    """
    _check_finite(x, "log_map_origin")
    sqrt_k = np.sqrt(k)
    o_inner_x = -sqrt_k * _time(x, axis)
    o = np.zeros_like(x)
    np.put_along_axis(o, np.zeros_like(_time(x, axis), dtype=np.intp), sqrt_k, axis=axis)
    v = x + o_inner_x * o / k

    norm = np.sqrt(np.sum(v * v, axis=axis, keepdims=True))
    dist = np.expand_dims(distance0(x, k, axis=axis), axis)
    safe = np.where(norm < LOG_MAP_ZERO_NORM, 1.0, norm)
    out = np.where(norm < LOG_MAP_ZERO_NORM, 0.0, dist * v / safe)
    return out.astype(x.dtype, copy=False)


def exp0(v: np.ndarray, k: float, axis: int = 0) -> np.ndarray:
    """Exponential map at the origin (inverse of ``log0``)."""
    _check_finite(v, "exp_map_origin")
    sqrt_k = np.sqrt(k)
    norm = np.sqrt(np.sum(v * v, axis=axis, keepdims=True))
    o = np.zeros_like(v)
    np.put_along_axis(o, np.zeros_like(_time(v, axis), dtype=np.intp), sqrt_k, axis=axis)
    safe = np.where(norm == 0, 1.0, norm)
    direction = np.where(norm == 0, 0.0, v / safe)
    out = np.cosh(norm / sqrt_k) * o + sqrt_k * np.sinh(norm / sqrt_k) * direction
    return out.astype(v.dtype, copy=False)


# ========================================
# Point-Level API
# ========================================

PointLike = Union[LorentzPoint, np.ndarray]


def _as_vector(x: PointLike) -> np.ndarray:
    return x.vector if isinstance(x, LorentzPoint) else np.asarray(x, dtype=np.float64)


def lorentz_inner(x: PointLike, y: PointLike) -> float:
    return float(inner(_as_vector(x), _as_vector(y)))


def reconstruct_time(s, k: Curvature = Curvature()) -> LorentzPoint:
    """Point whose time component is determined by ``s``."""
    s = np.asarray(s)
    if s.dtype.kind != "f":
        s = s.astype(np.float64)
    vector = reconstruct(s, k.k)
    return LorentzPoint(t=float(vector[0]), s=vector[1:], k=k)


def project_to_manifold(raw, k: Curvature = Curvature()) -> LorentzPoint:
    """Discard the raw time slot and reconstruct it from the space part."""
    raw = np.asarray(raw)
    if raw.ndim != 1 or raw.size < 2:
        raise DimensionError(f"expected an (n+1)-vector with n >= 1, got shape {raw.shape}")
    return reconstruct_time(raw[1:], k)


def geodesic_distance(o: LorentzPoint, x: LorentzPoint) -> float:
    """
    ``sqrt(k) arcosh(max(1, -<o,x>_L / k))``.

    Points within the manifold tolerance use the equivalent space-based form,
    which keeps its accuracy near the origin; any other point is measured
    through its time slot.
    """
    if o.k != x.k:
        raise ContractError(f"curvature mismatch: {o.k.k} vs {x.k.k}")
    if o.dim != x.dim:
        raise DimensionError(f"dimension mismatch: {o.dim} vs {x.dim}")
    if np.any(np.asarray(o.s) != 0):
        raise ContractError("distances are measured from the origin only")
    vector = x.vector.astype(np.float64)
    _check_finite(vector, "geodesic_distance")
    if x.residual() <= manifold_eps(np.asarray(x.s).dtype):
        return float(distance0(vector, x.k.k))
    return float(distance0_from_time(vector, x.k.k))


def log_map_origin(x: LorentzPoint) -> TangentVector:
    return TangentVector(v=log0(x.vector, x.k.k), k=x.k)


def exp_map_origin(v: TangentVector) -> LorentzPoint:
    vector = exp0(np.asarray(v.v), v.k.k)
    return LorentzPoint(t=float(vector[0]), s=vector[1:], k=v.k)
