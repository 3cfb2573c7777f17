"""
Runtime settings using Pydantic Settings V2.

Process-level knobs (default precision, logging, seeds, check sizes) are read
from environment variables prefixed with ``LOHG_`` or from a ``.env`` file.
Network hyperparameters live in ``lohgnet.config.network.NetworkConfig``.
"""

from typing import Literal

from pydantic import Field, ValidationInfo, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from lohgnet.core.constants import Precision


class Settings(BaseSettings):
    """
    Process settings loaded from the environment.

    Pydantic converts and validates values (``LOHG_PRECISION=f64`` becomes
    ``Precision.F64``) and rejects out-of-range numbers at import time.
    """

    # ========================================
    # Numerics
    # ========================================

    precision: Precision = Field(
        default=Precision.F32,
        description="Default tensor precision (f32 or f64)"
    )

    gradcheck_step: float = Field(
        default=1e-4,
        description="Central-difference step for gradient checks",
        gt=0.0,
        le=1e-1
    )

    gradcheck_block_step: float = Field(
        default=1e-6,
        description="Central-difference step for block and end-to-end checks",
        gt=0.0,
        le=1e-1
    )

    # ========================================
    # Seeds & Check Sizes
    # ========================================

    default_seed: int = Field(
        default=0,
        description="Seed used when neither config nor flags name one",
        ge=0
    )

    selftest_instances: int = Field(
        default=10,
        description="Random instances per selftest invariant",
        ge=1,
        le=1000
    )

    gradcheck_samples: int = Field(
        default=4,
        description="Sampled entries per parameter tensor in block gradchecks",
        ge=1
    )

    # ========================================
    # Logging Settings
    # ========================================

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="WARNING",
        description="Logging level"
    )

    # ========================================
    # Validators
    # ========================================

    @field_validator("gradcheck_block_step")
    @classmethod
    def validate_block_step(cls, v: float, info: ValidationInfo) -> float:
        """
        Keep the block step no larger than the primitive step.

        Block graphs contain leaky-relu kinks; a step larger than the one
        used for smooth primitives only makes kink crossings more likely.
        """
        primitive = info.data.get("gradcheck_step")
        if primitive is not None and v > primitive:
            raise ValueError(
                f"gradcheck_block_step ({v}) must not exceed "
                f"gradcheck_step ({primitive})"
            )
        return v

    model_config = SettingsConfigDict(
        env_prefix="LOHG_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


# ========================================
# Singleton Instance
# ========================================

settings = Settings()


def get_settings() -> Settings:
    """Return the process-wide settings instance."""
    return settings


def print_settings() -> None:
    """Pretty-print all settings (used by ``lohgnet config``)."""
    print("=" * 60)
    print("Runtime settings")
    print("=" * 60)
    for field_name in Settings.model_fields:
        value = getattr(settings, field_name)
        if isinstance(value, Precision):
            value = value.value
        print(f"  {field_name:30s} = {value}")
    print("=" * 60)
