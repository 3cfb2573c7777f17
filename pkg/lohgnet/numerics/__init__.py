"""
Numeric substrate: tensors, differentiable ops, gradient checks and the
weight container.
"""

from lohgnet.numerics.tensor import (
    Tape,
    Tensor,
    backward,
    current_dtype,
    current_precision,
    no_grad,
    precision,
)
from lohgnet.numerics.gradcheck import GradcheckReport, gradcheck

__all__ = [
    "Tape",
    "Tensor",
    "backward",
    "current_dtype",
    "current_precision",
    "no_grad",
    "precision",
    "GradcheckReport",
    "gradcheck",
]
