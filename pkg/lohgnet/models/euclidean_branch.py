"""
Euclidean branch: a plain convolutional encoder whose scales and widths
mirror the Lorentz branch (widths equal the Lorentz spatial widths).
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from lohgnet.core.constants import NUM_SCALES
from lohgnet.core.errors import DimensionError
from lohgnet.models.base import Module
from lohgnet.models.layers import Conv2d, ConvUnit
from lohgnet.models.lorentz_encoder import check_extents
from lohgnet.numerics.tensor import Tensor

logger = logging.getLogger(__name__)

UNITS_PER_SCALE = 2


@dataclass
class EuclideanPyramid:
    """Features E1..E5, finest first."""

    features: List[Tensor]

    def __post_init__(self) -> None:
        if len(self.features) != NUM_SCALES:
            raise DimensionError(f"expected {NUM_SCALES} scales, got {len(self.features)}")

    def __getitem__(self, index: int) -> Tensor:
        return self.features[index]

    def __len__(self) -> int:
        return len(self.features)

    @property
    def shapes(self):
        return [f.shape for f in self.features]


class EuclideanStage(Module):
    """``UNITS_PER_SCALE`` conv units at one scale."""

    def __init__(self, in_channels: int, width: int, rng: np.random.Generator, dtype=None):
        super().__init__(dtype)
        self.units = [
            ConvUnit(in_channels if i == 0 else width, width, rng, dtype=dtype)
            for i in range(UNITS_PER_SCALE)
        ]

    def forward(self, x: Tensor) -> Tensor:
        for unit in self.units:
            x = unit(x)
        return x


class EuclideanEncoder(Module):
    """
    Stage per scale, stride-2 conv between scales.

    Scale i has extent H / 2^(i-1) and ``widths[i]`` channels.
    """

    def __init__(self, widths: Sequence[int], rng: np.random.Generator, in_channels: int = 1, dtype=None):
        super().__init__(dtype)
        if len(widths) != NUM_SCALES:
            raise DimensionError(f"expected {NUM_SCALES} widths, got {len(widths)}")
        self.widths = tuple(widths)
        self.stages = [EuclideanStage(in_channels, widths[0], rng, dtype=dtype)]
        self.downsample = []
        for i in range(1, NUM_SCALES):
            self.downsample.append(Conv2d(widths[i - 1], widths[i], 3, rng, stride=2, dtype=dtype))
            self.stages.append(EuclideanStage(widths[i], widths[i], rng, dtype=dtype))

    def encode_scales(self, x: Tensor, depth: int = NUM_SCALES) -> List[Tensor]:
        """The first ``depth`` scales of the pyramid."""
        check_extents(x)
        features = [self.stages[0](x)]
        for i in range(1, depth):
            features.append(self.stages[i](self.downsample[i - 1](features[-1])))
        logger.debug("euclidean encoder scales: %s", [f.shape for f in features])
        return features

    def forward(self, x: Tensor) -> EuclideanPyramid:
        return EuclideanPyramid(self.encode_scales(x))


def euclid_encode(x: Tensor, encoder: EuclideanEncoder) -> EuclideanPyramid:
    return encoder(x)
