"""
Finite-difference gradient checking.

Compares the analytic gradient produced by ``backward`` against central
differences, entry by entry. Intended for 64-bit runs; in 32-bit the
difference quotient is dominated by rounding.

The per-entry error is ``|a - n| / max(|a|, |n|, floor)``: relative for
gradients above ``floor`` and absolute (scaled) below it, so entries whose
true gradient is zero do not blow up the ratio.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from lohgnet.config import settings
from lohgnet.core.errors import ContractError, NumericError
from lohgnet.numerics.tensor import Tensor, backward, no_grad

logger = logging.getLogger(__name__)

DEFAULT_FLOOR = 1e-3


@dataclass
class GradcheckReport:
    """
    Outcome of one gradient check.

    Attributes:
        name: Label of the checked graph
        max_rel_error: Largest per-entry error (see module docstring)
        max_abs_error: Largest absolute difference
        rel_tol: Tolerance the check was run with
        checked: Number of entries compared
        passed: ``max_rel_error <= rel_tol``
    """

    name: str
    max_rel_error: float
    max_abs_error: float
    rel_tol: float
    checked: int
    passed: bool

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}  {self.name:38s} max rel err (floored) {self.max_rel_error:.3e} "
            f"(tol {self.rel_tol:.0e}, {self.checked} entries)"
        )


def _evaluate(fn: Callable[..., Tensor], inputs: Sequence[Tensor]) -> float:
    with no_grad():
        out = fn(*inputs)
    value = out.item()
    if not np.isfinite(value):
        raise NumericError("gradcheck", "graph produced a non-finite value")
    return value


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Union[Tensor, Sequence[Tensor]],
    rel_tol: float = 1e-6,
    step: Optional[float] = None,
    floor: float = DEFAULT_FLOOR,
    max_entries: Optional[int] = None,
    seed: int = 0,
    name: str = "graph",
) -> GradcheckReport:
    """
    Check ``fn``'s analytic gradients against central differences.

    Args:
        fn: Builds a scalar tensor from the given inputs
        inputs: Tensor or tensors to differentiate with respect to
        rel_tol: Pass threshold on the per-entry error
        step: Central-difference step (default ``settings.gradcheck_step``)
        floor: Magnitude below which errors are measured absolutely
        max_entries: Compare at most this many randomly sampled entries per
            input (all entries when None)
        seed: Seed for entry sampling
        name: Label used in the report

    Returns:
        GradcheckReport

    Raises:
        ContractError: If ``fn`` does not produce a scalar
        NumericError: If any evaluation is non-finite
    """
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    step = step or settings.gradcheck_step
    rng = np.random.default_rng(seed)

    leaves = [Tensor(t.data, requires_grad=True, dtype=t.dtype) for t in inputs]
    out = fn(*leaves)
    if out.size != 1:
        raise ContractError(f"gradcheck needs a scalar output, got shape {out.shape}")
    backward(out)

    max_rel = 0.0
    max_abs = 0.0
    checked = 0

    for position, leaf in enumerate(leaves):
        analytic = leaf.grad if leaf.grad is not None else np.zeros(leaf.shape, leaf.dtype)
        entries: List[int] = list(range(leaf.size))
        if max_entries is not None and leaf.size > max_entries:
            entries = sorted(rng.choice(leaf.size, size=max_entries, replace=False).tolist())

        for entry in entries:
            values = []
            for sign in (1.0, -1.0):
                shifted = leaf.numpy()
                shifted.flat[entry] += sign * step
                trial = list(leaves)
                trial[position] = Tensor(shifted, dtype=leaf.dtype)
                values.append(_evaluate(fn, trial))
            numeric = (values[0] - values[1]) / (2 * step)
            exact = float(analytic.flat[entry])

            diff = abs(exact - numeric)
            rel = diff / max(abs(exact), abs(numeric), floor)
            max_abs = max(max_abs, diff)
            max_rel = max(max_rel, rel)
            checked += 1

    report = GradcheckReport(
        name=name,
        max_rel_error=max_rel,
        max_abs_error=max_abs,
        rel_tol=rel_tol,
        checked=checked,
        passed=max_rel <= rel_tol,
    )
    logger.debug(report.summary())
    return report
