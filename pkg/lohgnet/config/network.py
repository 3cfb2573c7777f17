"""
Network configuration.

``NetworkConfig`` holds every hyperparameter the network, the toy trainer and
the CLI agree on. It is a plain pydantic model so it serializes to the JSON
config files accepted by ``lohgnet train --config`` and is embedded in
checkpoints.

Precedence when the CLI builds a config: defaults < environment settings
(precision, seed) < JSON file < command-line flags.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from lohgnet.config.settings import settings
from lohgnet.core.constants import (
    NUM_SCALES,
    PRESET_INPUT_SIZE,
    PRESET_WIDTHS,
    SCALE_DIVISOR,
    ChannelPreset,
    Precision,
)
from lohgnet.core.errors import ConfigError, InputError

MAX_HYPEREDGES = 256


class NetworkConfig(BaseModel):
    """
    Hyperparameters of one network instance.

    Attributes:
        curvature: Manifold constant k > 0
        preset: Channel-width schedule (tiny or full)
        input_size: Square input extent; None selects the preset default
        sparsity: Incidence sparsity factor lambda
        hyperedges: Hyperedge count M; None selects the preset rule
        degree_eps: Regularizer added to both degree diagonals
        attention_reduction: Reduction ratio r of the geometric attention
        seed: Seed for parameter initialization and data order
        precision: Tensor precision
        learning_rate: SGD step size of the toy trainer
        steps: Number of toy training steps
        threshold: Binarization threshold used by inference and evaluation
    """

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    curvature: float = Field(default=1.0, gt=0.0)
    preset: ChannelPreset = ChannelPreset.FULL
    input_size: Optional[int] = Field(default=None, ge=16)

    sparsity: float = Field(default=0.5, ge=0.0)
    hyperedges: Optional[int] = Field(default=None, ge=1)
    degree_eps: float = Field(default=1e-6, gt=0.0)
    attention_reduction: int = Field(default=4, ge=1)

    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0)
    precision: Precision = Field(default_factory=lambda: settings.precision)
    learning_rate: float = Field(default=1e-2, ge=0.0)
    steps: int = Field(default=500, ge=0)
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0)

    # Ablation switches
    euclidean_branch: bool = True
    lorentz_branch: bool = True
    horl: bool = True
    horl_hypergraph: bool = True
    galrcm_residual: bool = True
    galrcm_attention: bool = True

    # ========================================
    # Validators
    # ========================================

    @field_validator("input_size")
    @classmethod
    def validate_input_size(cls, v: Optional[int]) -> Optional[int]:
        """Both encoders halve the extent four times."""
        if v is not None and v % SCALE_DIVISOR != 0:
            raise ValueError(f"input_size ({v}) must be divisible by {SCALE_DIVISOR}")
        return v

    @model_validator(mode="after")
    def validate_branches(self) -> "NetworkConfig":
        """At least one encoder branch must feed the fusion."""
        if not (self.euclidean_branch or self.lorentz_branch):
            raise ValueError("euclidean_branch and lorentz_branch cannot both be disabled")
        return self

    # ========================================
    # Derived Values
    # ========================================

    @property
    def widths(self) -> Tuple[int, ...]:
        """Channel width per scale (spatial channels on the Lorentz side)."""
        return PRESET_WIDTHS[self.preset]

    @property
    def resolved_input_size(self) -> int:
        return self.input_size or PRESET_INPUT_SIZE[self.preset]

    @property
    def deepest_vertices(self) -> int:
        """Number of hypergraph vertices N at the deepest scale."""
        side = self.resolved_input_size // SCALE_DIVISOR
        return side * side

    @property
    def resolved_hyperedges(self) -> int:
        """
        Hyperedge count M.

        Full preset uses 256; the tiny preset caps M at 4*N so small
        instances keep a meaningful vertex/hyperedge ratio.
        """
        if self.hyperedges is not None:
            return self.hyperedges
        if self.preset == ChannelPreset.FULL:
            return MAX_HYPEREDGES
        return min(MAX_HYPEREDGES, 4 * self.deepest_vertices)

    @property
    def vertex_width(self) -> int:
        """Vertex feature width d = ceil(C/2) for the deepest width C."""
        return math.ceil(self.widths[NUM_SCALES - 1] / 2)

    # ========================================
    # Loading & Merging
    # ========================================

    @classmethod
    def from_file(cls, path: Path) -> "NetworkConfig":
        """Load a JSON config file."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise InputError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.build(data)

    @classmethod
    def build(cls, data: Dict[str, Any]) -> "NetworkConfig":
        """Validate a mapping, converting pydantic errors to ``ConfigError``."""
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"invalid network config: {exc}") from exc

    def with_overrides(self, **overrides: Any) -> "NetworkConfig":
        """Return a new config with non-None overrides applied and revalidated."""
        data = self.model_dump()
        data.update({key: value for key, value in overrides.items() if value is not None})
        return self.build(data)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)
