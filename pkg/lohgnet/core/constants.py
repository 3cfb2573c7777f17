"""
Library-wide constants.

Centralize enumerations, numeric tolerances and file-format markers here so
the numerics, geometry, model and CLI layers agree on a single value.
"""

from enum import Enum, IntEnum


# ========================================
# Numeric Precision
# ========================================

class Precision(str, Enum):
    """
    Floating point width used for tensors.

    Inherits from str so the value reads naturally in JSON configs
    ("f32") and compares equal to its string form.
    """

    F32 = "f32"
    """32-bit floats (training and inference default)."""

    F64 = "f64"
    """64-bit floats (finite-difference and oracle checks)."""


# ========================================
# Network Presets
# ========================================

class ChannelPreset(str, Enum):
    """Channel-width schedules for the five encoder scales."""

    TINY = "tiny"
    FULL = "full"


PRESET_WIDTHS = {
    ChannelPreset.TINY: (8, 16, 32, 64, 128),
    ChannelPreset.FULL: (16, 32, 64, 128, 256),
}

PRESET_INPUT_SIZE = {
    ChannelPreset.TINY: 64,
    ChannelPreset.FULL: 256,
}

NUM_SCALES = 5
SCALE_DIVISOR = 2 ** (NUM_SCALES - 1)


# ========================================
# Elementwise Functions
# ========================================

class Elementwise(str, Enum):
    """Pointwise functions accepted by ``ops.elementwise``."""

    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    SIGMOID = "sigmoid"
    ADD = "add"
    MUL = "mul"
    SUB = "sub"
    SCALE = "scale"


LEAKY_SLOPE = 0.1


# ========================================
# Gradient Check Targets
# ========================================

class GradcheckTarget(str, Enum):
    """Module groups selectable with ``lohgnet gradcheck --module``."""

    ALL = "all"
    NUMERICS = "numerics"
    LORENTZ = "lorentz"
    EUCLID = "euclid"
    HORL = "horl"
    E2E = "e2e"


# ========================================
# Exit Codes
# ========================================

class ExitCode(IntEnum):
    """Process exit codes; a stable contract of the CLI."""

    OK = 0
    FAILED = 1
    USAGE = 2
    NUMERIC = 3


# ========================================
# Tolerances
# ========================================

MANIFOLD_EPS = {Precision.F32: 1e-4, Precision.F64: 1e-9}
LOG_MAP_ZERO_NORM = 1e-7
NORM_EPS = 1e-5
DEGREE_EPS = 1e-6

# ========================================
# File Formats
# ========================================

WEIGHTS_MAGIC = b"LOHGW001"
FA_DISPLAY_SCALE = 1e6
