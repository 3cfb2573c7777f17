"""
Branch fusion, progressive decoding and the training loss.

    fuse:    F_i = space(log_o(L_i)) + E_i
    decode:  deepest to shallowest, x = unit(up2(x) + align(F_i)); head 1x1 + sigmoid
    loss:    soft IoU with smoothing 1
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from lohgnet.core.constants import NUM_SCALES
from lohgnet.core.errors import ContractError, DimensionError
from lohgnet.geometry.maps import LorentzFeatureMap, log_map_spatial
from lohgnet.models.base import Module
from lohgnet.models.layers import Conv2d, ConvUnit
from lohgnet.numerics import ops
from lohgnet.numerics.tensor import Tensor

logger = logging.getLogger(__name__)

SOFT_IOU_SMOOTH = 1.0
HEAD_PRIOR = 0.01


@dataclass
class FusedPyramid:
    """F1..F5, finest first; F5 is replaced by its HORL output before decoding."""

    features: List[Tensor]

    def __post_init__(self) -> None:
        if len(self.features) != NUM_SCALES:
            raise DimensionError(f"expected {NUM_SCALES} fused scales, got {len(self.features)}")

    def with_deepest(self, deepest: Tensor) -> "FusedPyramid":
        if deepest.shape != self.features[-1].shape:
            raise DimensionError(f"deepest feature {deepest.shape} != {self.features[-1].shape}")
        return FusedPyramid(self.features[:-1] + [deepest])


@dataclass
class PredictionMap:
    """Per-pixel target probability, B x 1 x H x W in [0, 1]."""

    probs: Tensor

    def numpy(self) -> np.ndarray:
        return self.probs.numpy()


# ========================================
# Fusion
# ========================================

def fuse(
    lorentz: Optional[Sequence[LorentzFeatureMap]],
    euclidean: Optional[Sequence[Tensor]],
) -> FusedPyramid:
    """
    Add the tangent-space image of each Lorentz scale to its Euclidean scale.

    Either branch may be None (ablation), in which case the other passes
    through unchanged.
    """
    if lorentz is None and euclidean is None:
        raise ContractError("fusion needs at least one branch")
    tangents = [log_map_spatial(m) for m in lorentz] if lorentz is not None else None
    if tangents is None:
        return FusedPyramid(list(euclidean))
    if euclidean is None:
        return FusedPyramid(tangents)

    if len(tangents) != len(euclidean):
        raise DimensionError(f"{len(tangents)} Lorentz scales vs {len(euclidean)} Euclidean scales")
    fused = []
    for scale, (tangent, feature) in enumerate(zip(tangents, euclidean), start=1):
        if tangent.shape != feature.shape:
            raise DimensionError(f"scale {scale}: Lorentz {tangent.shape} vs Euclidean {feature.shape}")
        fused.append(ops.add(tangent, feature))
    return FusedPyramid(fused)


# ========================================
# Decoder
# ========================================

class DecoderStage(Module):
    """Upsample the coarser map, add the aligned skip, refine."""

    def __init__(self, coarse: int, skip: int, rng: np.random.Generator, dtype=None):
        super().__init__(dtype)
        self.align = Conv2d(skip, coarse, 1, rng, dtype=dtype)
        self.unit = ConvUnit(coarse, skip, rng, dtype=dtype)

    def forward(self, coarse: Tensor, skip: Tensor) -> Tensor:
        up = ops.upsample2x(coarse)
        if up.shape[2:] != skip.shape[2:]:
            raise DimensionError(f"decoder: upsampled {up.shape} does not meet skip {skip.shape}")
        return self.unit(ops.add(up, self.align(skip)))


class Decoder(Module):
    """
    Additive-skip U-shaped decoder.

    Stage i takes the decoded map from scale i+1 (``widths[i+1]`` channels),
    upsamples it, adds the 1x1-aligned F_i and emits ``widths[i]`` channels.
    The head bias starts at the logit of a 1% foreground prior.
    """

    def __init__(self, widths: Sequence[int], rng: np.random.Generator, dtype=None):
        super().__init__(dtype)
        self.stages = [
            DecoderStage(widths[i + 1], widths[i], rng, dtype=dtype)
            for i in reversed(range(NUM_SCALES - 1))
        ]
        self.head = Conv2d(widths[0], 1, 1, rng, init="lecun", dtype=dtype)
        self.head.bias = self.head.parameter(np.full(1, np.log(HEAD_PRIOR / (1 - HEAD_PRIOR))))

    def forward(self, fused: FusedPyramid) -> PredictionMap:
        features = fused.features
        x = features[-1]
        for stage, skip in zip(self.stages, reversed(features[:-1])):
            x = stage(x, skip)
        return PredictionMap(ops.sigmoid(self.head(x)))


def decode(fused: FusedPyramid, decoder: Decoder) -> PredictionMap:
    return decoder(fused)


# ========================================
# Loss
# ========================================

def soft_iou_loss(pred: PredictionMap, gt: Tensor, smooth: float = SOFT_IOU_SMOOTH) -> Tensor:
    """
    ``1 - (sum(p*g) + s) / (sum(p) + sum(g) - sum(p*g) + s)``.

    Raises:
        DimensionError: Shapes differ
        ContractError: ``gt`` is not binary
    """
    probs = pred.probs
    if probs.shape != gt.shape:
        raise DimensionError(f"prediction {probs.shape} vs mask {gt.shape}")
    if not np.all((gt.data == 0) | (gt.data == 1)):
        raise ContractError("ground-truth mask must be binary")
    intersection = ops.sum(ops.mul(probs, gt))
    union = ops.sub(ops.add(ops.sum(probs), ops.sum(gt)), intersection)
    return ops.sub(1.0, ops.div(ops.add(intersection, smooth), ops.add(union, smooth)))

