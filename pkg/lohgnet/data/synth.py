"""
Synthetic infrared scenes: small Gaussian targets on smooth clutter.

A scene is built in three layers from one seeded generator:

1. clutter: uniform noise box-blurred with ``scipy.ndimage.uniform_filter``
   and rescaled to ``clutter_level`` contrast;
2. targets: isotropic Gaussians on integer centres, kept fully inside the
   image (3 sigma margin) and ``min_separation`` apart;
3. sensor noise: additive normal noise.

The sum is min-max normalized and clipped to [0, 1]. The ground-truth mask
holds the pixels where a target's noiseless profile exceeds half its peak.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import ndimage

from lohgnet.core.errors import GenerationError

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 1000
HALF_PEAK = 0.5


class SceneSpec(BaseModel):
    """
    Parameters of one synthetic scene.

    Attributes:
        width, height: Image extents in pixels
        num_targets: Number of targets to place
        target_sigma_range: Gaussian sigma range in pixels
        target_amplitude_range: Peak amplitude range (positive)
        clutter_smoothness: Box-blur radius of the clutter (pixels)
        clutter_level: Clutter contrast before normalization
        noise_std: Standard deviation of additive sensor noise
        min_separation: Minimum distance between target centres
        centers: Optional fixed (row, col) centres, one per target
        seed: 64-bit seed; equal specs give bit-identical scenes
    """

    model_config = ConfigDict(extra="forbid")

    width: int = Field(default=64, ge=1)
    height: int = Field(default=64, ge=1)
    num_targets: int = Field(default=2, ge=0)
    target_sigma_range: Tuple[float, float] = (0.5, 2.0)
    target_amplitude_range: Tuple[float, float] = (0.3, 1.0)
    clutter_smoothness: int = Field(default=4, ge=0)
    clutter_level: float = Field(default=0.4, ge=0.0)
    noise_std: float = Field(default=0.02, ge=0.0)
    min_separation: float = Field(default=8.0, ge=0.0)
    centers: Optional[List[Tuple[int, int]]] = None
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @field_validator("target_sigma_range", "target_amplitude_range")
    @classmethod
    def validate_range(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        low, high = v
        if not 0 < low <= high:
            raise ValueError(f"range must satisfy 0 < low <= high, got {v}")
        return v

    @model_validator(mode="after")
    def validate_centers(self) -> "SceneSpec":
        if self.centers is not None and len(self.centers) != self.num_targets:
            raise ValueError(
                f"{len(self.centers)} centres given for {self.num_targets} targets"
            )
        return self


@dataclass
class Target:
    row: int
    col: int
    sigma: float
    amplitude: float

    @property
    def margin(self) -> int:
        return int(math.ceil(3 * self.sigma))

    def profile(self, height: int, width: int) -> np.ndarray:
        """Unit-peak Gaussian over the image grid."""
        rows, cols = np.ogrid[:height, :width]
        sq_dist = (rows - self.row) ** 2 + (cols - self.col) ** 2
        return np.exp(-sq_dist / (2 * self.sigma ** 2))


@dataclass
class Scene:
    """
    One generated scene.

    Attributes:
        image: 1 x H x W float64 in [0, 1]
        mask: 1 x H x W uint8 in {0, 1}
        targets: Generating targets
    """

    image: np.ndarray
    mask: np.ndarray
    targets: List[Target] = field(default_factory=list)

    @property
    def target_centroids(self) -> List[Tuple[float, float]]:
        return [(float(t.row), float(t.col)) for t in self.targets]


def _inside(target: Target, height: int, width: int) -> bool:
    m = target.margin
    return m <= target.row <= height - 1 - m and m <= target.col <= width - 1 - m


def _place_targets(spec: SceneSpec, rng: np.random.Generator) -> List[Target]:
    targets: List[Target] = []
    for index in range(spec.num_targets):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            sigma = float(rng.uniform(*spec.target_sigma_range))
            amplitude = float(rng.uniform(*spec.target_amplitude_range))
            if spec.centers is not None:
                row, col = spec.centers[index]
            else:
                row = int(rng.integers(0, spec.height))
                col = int(rng.integers(0, spec.width))
            candidate = Target(row, col, sigma, amplitude)
            if not _inside(candidate, spec.height, spec.width):
                continue
            if any(math.hypot(t.row - row, t.col - col) < spec.min_separation for t in targets):
                continue
            targets.append(candidate)
            break
        else:
            raise GenerationError(
                f"could not place target {index + 1} of {spec.num_targets} in "
                f"{spec.width}x{spec.height} after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )
    return targets


def _clutter(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    noise = rng.random((spec.height, spec.width))
    blurred = ndimage.uniform_filter(noise, size=2 * spec.clutter_smoothness + 1, mode="reflect")
    span = np.ptp(blurred)
    return (blurred - blurred.min()) / span * spec.clutter_level if span > 0 else np.zeros_like(blurred)


def generate(spec: SceneSpec) -> Scene:
    """
    Build the scene described by ``spec``.

    Raises:
        GenerationError: Targets cannot be placed within the allowed attempts
    """
    rng = np.random.default_rng(spec.seed)
    clutter = _clutter(spec, rng)
    targets = _place_targets(spec, rng)

    field_ = np.zeros((spec.height, spec.width))
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    for target in targets:
        profile = target.profile(spec.height, spec.width)
        field_ += target.amplitude * profile
        mask |= profile > HALF_PEAK

    raw = clutter + field_ + spec.noise_std * rng.standard_normal((spec.height, spec.width))
    span = np.ptp(raw)
    image = np.clip((raw - raw.min()) / span, 0.0, 1.0) if span > 0 else np.zeros_like(raw)

    logger.debug(
        "scene seed=%d: %d targets, %d mask pixels", spec.seed, len(targets), int(mask.sum())
    )
    return Scene(image=image[np.newaxis], mask=mask[np.newaxis].astype(np.uint8), targets=targets)
