"""
Euclidean building blocks shared by both encoders, HORL and the decoder.
"""

from typing import Literal, Optional

import numpy as np

from lohgnet.core.constants import LEAKY_SLOPE, NORM_EPS
from lohgnet.core.errors import ContractError
from lohgnet.models.base import Module
from lohgnet.numerics import ops
from lohgnet.numerics.tensor import Tensor

Init = Literal["he", "lecun", "zeros", "identity"]


def init_kernel(
    rng: np.random.Generator,
    shape: tuple,
    scheme: Init = "he",
    gain: float = 1.0,
) -> np.ndarray:
    """
    Initial O x C x kh x kw kernel.

    ``he`` and ``lecun`` draw normals with variance 2/fan_in and 1/fan_in
    (times ``gain``); ``identity`` puts ones on the centre tap of matching
    channels.
    """
    out_channels, in_channels, kh, kw = shape
    fan_in = in_channels * kh * kw
    if scheme == "zeros":
        return np.zeros(shape)
    if scheme == "identity":
        kernel = np.zeros(shape)
        for c in range(min(out_channels, in_channels)):
            kernel[c, c, kh // 2, kw // 2] = 1.0
        return kernel
    if scheme == "he":
        return rng.standard_normal(shape) * np.sqrt(2.0 * gain / fan_in)
    if scheme == "lecun":
        return rng.standard_normal(shape) * np.sqrt(gain / fan_in)
    raise ContractError(f"unknown init scheme {scheme!r}")


class Conv2d(Module):
    """
    2-D convolution with optional bias.

    Attributes:
        weight: O x C x k x k kernel
        bias: length-O bias (absent when ``bias=False``)
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: Optional[int] = None,
        bias: bool = True,
        init: Init = "he",
        gain: float = 1.0,
        dtype: Optional[type] = None,
    ):
        super().__init__(dtype)
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        self.weight = self.parameter(
            init_kernel(rng, (out_channels, in_channels, kernel_size, kernel_size), init, gain)
        )
        if bias:
            self.bias = self.parameter(np.zeros(out_channels))

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, getattr(self, "bias", None), self.stride, self.padding)


class InstanceNorm2d(Module):
    """Per-(item, channel) normalization over H x W with a learnable affine."""

    def __init__(self, channels: int, eps: float = NORM_EPS, dtype: Optional[type] = None):
        super().__init__(dtype)
        self.eps = eps
        self.gamma = self.parameter(np.ones(channels))
        self.beta = self.parameter(np.zeros(channels))

    def forward(self, x: Tensor) -> Tensor:
        return affine(ops.instance_norm(x, self.eps), self.gamma, self.beta)


def affine(x: Tensor, gamma: Tensor, beta: Tensor) -> Tensor:
    """Per-channel ``gamma * x + beta`` on a B x C x H x W map."""
    shape = (1, gamma.shape[0], 1, 1)
    return ops.add(ops.mul(x, ops.reshape(gamma, shape)), ops.reshape(beta, shape))


class ConvUnit(Module):
    """conv3x3 -> instance norm -> leaky relu."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        stride: int = 1,
        dtype: Optional[type] = None,
    ):
        super().__init__(dtype)
        self.conv = Conv2d(in_channels, out_channels, 3, rng, stride=stride, dtype=dtype)
        self.norm = InstanceNorm2d(out_channels, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return ops.leaky_relu(self.norm(self.conv(x)), LEAKY_SLOPE)
