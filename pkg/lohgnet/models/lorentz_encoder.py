"""
Lorentz branch of the network.

Every operation takes and returns a ``LorentzFeatureMap`` whose temporal
channel is rebuilt from the spatial channels, so each output lies on the
manifold by construction:

    lib_lift            Euclidean input -> manifold (3x3 conv + time)
    lorentz_conv        Euclidean conv over all 1+C channels -> spatial, + time
    lorentz_norm        instance norm + affine on spatial channels, + time
    manifold_activation leaky relu on spatial channels, + time
    geometric_attention alpha = sigmoid(W2 relu(W1 [gap(t), gap(s)]))
    galrcm_fuse         s_f = alpha * s_main + s_proj, + time

``GALRCM`` chains them into one downsampling residual block and
``LorentzEncoder`` stacks the input block and four GALRCM blocks into the
five-scale pyramid L1..L5.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np

from lohgnet.core.constants import LEAKY_SLOPE, NORM_EPS, NUM_SCALES, SCALE_DIVISOR
from lohgnet.core.errors import DimensionError
from lohgnet.geometry.maps import CHANNEL_AXIS, LorentzFeatureMap, from_spatial
from lohgnet.models.base import Module
from lohgnet.models.layers import Conv2d, affine
from lohgnet.numerics import ops
from lohgnet.numerics.tensor import Tensor

logger = logging.getLogger(__name__)


# ========================================
# Functional Operations
# ========================================

def lib_lift(x: Tensor, weight: Tensor, bias: Optional[Tensor], k: float) -> LorentzFeatureMap:
    """Lift a Euclidean B x C x H x W map onto the manifold."""
    if x.ndim != 4 or x.shape[CHANNEL_AXIS] != weight.shape[1]:
        raise DimensionError(
            f"lib_lift: input {x.shape} does not match a kernel over {weight.shape[1]} channels"
        )
    return from_spatial(ops.conv2d(x, weight, bias, 1, weight.shape[2] // 2), k)


def lorentz_conv(
    x: LorentzFeatureMap,
    weight: Tensor,
    bias: Optional[Tensor],
    stride: int = 1,
    padding: Optional[int] = None,
) -> LorentzFeatureMap:
    """
    Convolve all 1+C channels into C_out spatial channels and rebuild time.

    Args:
        x: Input map
        weight: C_out x (1+C) x kh x kw kernel
        bias: Length-C_out bias or None
        stride: Convolution stride
        padding: Zero padding (default kh // 2)
    """
    if weight.shape[1] != x.shape[CHANNEL_AXIS]:
        raise DimensionError(
            f"lorentz_conv: kernel consumes {weight.shape[1]} channels, map has {x.shape[CHANNEL_AXIS]}"
        )
    padding = weight.shape[2] // 2 if padding is None else padding
    return from_spatial(ops.conv2d(x.data, weight, bias, stride, padding), x.k)


def lorentz_norm(
    x: LorentzFeatureMap,
    gamma: Tensor,
    beta: Tensor,
    eps: float = NORM_EPS,
) -> LorentzFeatureMap:
    """Instance-normalize the spatial channels, rescale, rebuild time."""
    return from_spatial(affine(ops.instance_norm(x.space, eps), gamma, beta), x.k)


def manifold_activation(x: LorentzFeatureMap, slope: float = LEAKY_SLOPE) -> LorentzFeatureMap:
    return from_spatial(ops.leaky_relu(x.space, slope), x.k)


def channel_statistics(x: LorentzFeatureMap) -> Tensor:
    """[gap(time), gap(space)]: B x (1+C) x 1 x 1."""
    return ops.gap(x.data)


def geometric_attention(
    x: LorentzFeatureMap,
    w1: Tensor,
    b1: Optional[Tensor],
    w2: Tensor,
    b2: Optional[Tensor],
) -> Tensor:
    """
    Channel attention from temporal and spatial statistics.

    Returns:
        alpha, B x C x 1 x 1 with entries in (0, 1)
    """
    if w2.shape[0] != x.spatial_channels:
        raise DimensionError(
            f"attention emits {w2.shape[0]} weights for {x.spatial_channels} spatial channels"
        )
    hidden = ops.relu(ops.conv2d(channel_statistics(x), w1, b1))
    return ops.sigmoid(ops.conv2d(hidden, w2, b2))


def galrcm_fuse(
    alpha: Optional[Tensor],
    s_main: Tensor,
    s_proj: Optional[Tensor],
    k: float,
) -> LorentzFeatureMap:
    """
    ``s_f = alpha * s_main + s_proj`` followed by temporal reconstruction.

    ``alpha=None`` stands for alpha = 1 and ``s_proj=None`` for no shortcut.
    """
    fused = s_main if alpha is None else ops.mul(s_main, alpha)
    if s_proj is not None:
        if s_proj.shape != s_main.shape:
            raise DimensionError(
                f"shortcut {s_proj.shape} is not aligned with main branch {s_main.shape}"
            )
        fused = ops.add(fused, s_proj)
    return from_spatial(fused, k)


# ========================================
# Modules
# ========================================

class LorentzInputBlock(Module):
    """LIB: learned 3x3 lift to ``width`` spatial channels."""

    def __init__(self, in_channels: int, width: int, k: float, rng: np.random.Generator, dtype=None):
        super().__init__(dtype)
        self.k = k
        self.lift = Conv2d(in_channels, width, 3, rng, init="lecun", dtype=dtype)

    def forward(self, x: Tensor) -> LorentzFeatureMap:
        return lib_lift(x, self.lift.weight, self.lift.bias, self.k)


class LorentzConv(Module):
    def __init__(
        self,
        in_spatial: int,
        out_spatial: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        gain: float = 1.0,
        dtype=None,
    ):
        super().__init__(dtype)
        self.conv = Conv2d(
            1 + in_spatial, out_spatial, kernel_size, rng,
            stride=stride, init="lecun", gain=gain, dtype=dtype,
        )

    def forward(self, x: LorentzFeatureMap) -> LorentzFeatureMap:
        return lorentz_conv(x, self.conv.weight, self.conv.bias, self.conv.stride, self.conv.padding)


class LorentzNorm(Module):
    def __init__(self, channels: int, eps: float = NORM_EPS, dtype=None):
        super().__init__(dtype)
        self.eps = eps
        self.gamma = self.parameter(np.ones(channels))
        self.beta = self.parameter(np.zeros(channels))

    def forward(self, x: LorentzFeatureMap) -> LorentzFeatureMap:
        return lorentz_norm(x, self.gamma, self.beta, self.eps)


class GeometricAttention(Module):
    """
    Two 1x1 transforms over the (1+C) channel statistics.

    Hidden width is max(1, C // reduction).
    """

    def __init__(self, channels: int, reduction: int, rng: np.random.Generator, dtype=None):
        super().__init__(dtype)
        hidden = max(1, channels // reduction)
        self.reduce = Conv2d(1 + channels, hidden, 1, rng, dtype=dtype)
        self.expand = Conv2d(hidden, channels, 1, rng, init="lecun", dtype=dtype)

    def forward(self, x: LorentzFeatureMap) -> Tensor:
        return geometric_attention(
            x, self.reduce.weight, self.reduce.bias, self.expand.weight, self.expand.bias
        )


class GALRCM(Module):
    """
    Geometric-attention guided Lorentz residual convolution block.

    Main branch: Lorentz conv (stride 1) -> Lorentz norm -> activation ->
    Lorentz conv (stride 2). Shortcut: strided 1x1 Lorentz conv. The two are
    fused with the attention weights computed on the main-branch output.
    Halves H and W and maps ``in_spatial`` to ``out_spatial`` channels.
    """

    def __init__(
        self,
        in_spatial: int,
        out_spatial: int,
        k: float,
        rng: np.random.Generator,
        reduction: int = 4,
        residual: bool = True,
        attention: bool = True,
        dtype=None,
    ):
        super().__init__(dtype)
        self.k = k
        self.conv_in = LorentzConv(in_spatial, out_spatial, 3, rng, dtype=dtype)
        self.norm = LorentzNorm(out_spatial, dtype=dtype)
        self.conv_down = LorentzConv(out_spatial, out_spatial, 3, rng, stride=2, dtype=dtype)
        if attention:
            self.attention = GeometricAttention(out_spatial, reduction, rng, dtype=dtype)
        if residual:
            # Norm-preserving at init: |s_proj|^2 ~ |s|^2 rather than growing per block.
            self.shortcut = LorentzConv(
                in_spatial, out_spatial, 1, rng, stride=2,
                gain=(1 + in_spatial) / (2.0 * out_spatial), dtype=dtype,
            )

    def main_branch(self, x: LorentzFeatureMap) -> LorentzFeatureMap:
        return self.conv_down(manifold_activation(self.norm(self.conv_in(x))))

    def forward(self, x: LorentzFeatureMap) -> LorentzFeatureMap:
        main = self.main_branch(x)
        alpha = self.attention(main) if hasattr(self, "attention") else None
        proj = self.shortcut(x).space if hasattr(self, "shortcut") else None
        return galrcm_fuse(alpha, main.space, proj, self.k)


class LorentzEncoder(Module):
    """
    Five-scale hyperbolic encoder.

    L1 = LIB(x); L(i+1) = GALRCM_i(L(i)). Scale i has extent H / 2^(i-1).
    """

    def __init__(
        self,
        widths: Sequence[int],
        k: float,
        rng: np.random.Generator,
        reduction: int = 4,
        residual: bool = True,
        attention: bool = True,
        in_channels: int = 1,
        dtype=None,
    ):
        super().__init__(dtype)
        if len(widths) != NUM_SCALES:
            raise DimensionError(f"expected {NUM_SCALES} widths, got {len(widths)}")
        self.k = k
        self.lib = LorentzInputBlock(in_channels, widths[0], k, rng, dtype=dtype)
        self.blocks = [
            GALRCM(widths[i], widths[i + 1], k, rng, reduction, residual, attention, dtype=dtype)
            for i in range(NUM_SCALES - 1)
        ]

    def forward(self, x: Tensor) -> List[LorentzFeatureMap]:
        check_extents(x)
        maps = [self.lib(x)]
        for block in self.blocks:
            maps.append(block(maps[-1]))
        logger.debug("lorentz encoder scales: %s", [m.shape for m in maps])
        return maps


def check_extents(x: Tensor) -> None:
    """Both encoders need B x C x H x W with H and W divisible by 16."""
    if x.ndim != 4:
        raise DimensionError(f"expected B x C x H x W input, got {x.shape}")
    if x.shape[2] % SCALE_DIVISOR or x.shape[3] % SCALE_DIVISOR:
        raise DimensionError(
            f"input extents {x.shape[2]}x{x.shape[3]} must be divisible by {SCALE_DIVISOR}"
        )


def galrcm_forward(x: LorentzFeatureMap, block: GALRCM) -> LorentzFeatureMap:
    return block(x)


def lorentz_encode(x: Tensor, encoder: LorentzEncoder) -> List[LorentzFeatureMap]:
    return encoder(x)
