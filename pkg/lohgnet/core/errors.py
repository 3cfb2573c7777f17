"""
Exception hierarchy.

Every failure the library reports on purpose derives from ``LohgError`` and
carries the CLI exit code it maps to, so the command-line layer needs one
``except`` clause.
"""

from typing import Optional

from lohgnet.core.constants import ExitCode


class LohgError(Exception):
    """Base class for all library errors."""

    exit_code: ExitCode = ExitCode.USAGE


class DimensionError(LohgError):
    """Shapes or extents are incompatible with the requested operation."""


class ContractError(LohgError):
    """A precondition of an operation was violated by the caller."""


class ConfigError(LohgError):
    """Configuration file or flag values are invalid."""


class InputError(LohgError):
    """A file or directory the command needs is missing or unreadable."""


class GenerationError(LohgError):
    """Synthetic scene generation could not satisfy its constraints."""


class FormatError(LohgError):
    """
    A binary or text file does not follow its declared format.

    Attributes:
        offset: Byte offset where parsing failed (None if not applicable)
    """

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class NumericError(LohgError):
    """
    A NaN or infinity was produced.

    Attributes:
        op: Name of the operation that produced the non-finite value
    """

    exit_code = ExitCode.NUMERIC

    def __init__(self, op: str, detail: str = "non-finite value produced"):
        self.op = op
        super().__init__(f"{op}: {detail}")
