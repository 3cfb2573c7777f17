"""
Base class for all network components.

Provides common functionality:
- Parameter discovery (named_parameters, parameters)
- Serialization (state_dict, load_state_dict)
- Rebinding parameters (bind_parameters, used by SGD and gradient checks)
- String representation (__repr__)

Every ``Tensor`` attribute is a parameter (created with ``requires_grad=True``;
gradient checks temporarily bind constant copies into the same slots).
Child components may be attributes or lists of components; names are dotted
attribute paths such as ``blocks.2.attention.reduce.weight``. Tensors are
immutable, so an update binds a fresh tensor into the same slot.
"""

import logging
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from lohgnet.core.errors import ContractError, DimensionError
from lohgnet.numerics.tensor import Tensor, current_dtype

logger = logging.getLogger(__name__)


class Module:
    """
    Container of parameters and child modules.

    Subclasses set attributes in ``__init__`` and implement ``forward``;
    attribute order fixes parameter order, which fixes checkpoint layout.
    """

    def __init__(self, dtype: Optional[type] = None):
        self.dtype = np.dtype(dtype or current_dtype())

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    # ========================================
    # Parameter Creation
    # ========================================

    def parameter(self, values: np.ndarray) -> Tensor:
        """Wrap initial values as a trainable tensor of this module's dtype."""
        return Tensor(values, requires_grad=True, dtype=self.dtype)

    # ========================================
    # Discovery
    # ========================================

    def _slots(self) -> Iterator[Tuple[str, object]]:
        for name, value in vars(self).items():
            if isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    yield f"{name}.{index}", item
            else:
                yield name, value

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in self._slots():
            if isinstance(value, Tensor):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix + name + ".")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    # ========================================
    # Rebinding
    # ========================================

    def _resolve(self, path: str) -> Tuple[object, str]:
        """Return (owner, last attribute or index) for a dotted path."""
        owner: object = self
        parts = path.split(".")
        for part in parts[:-1]:
            owner = owner[int(part)] if isinstance(owner, (list, tuple)) else getattr(owner, part)
        return owner, parts[-1]

    def bind_parameters(self, tensors: Mapping[str, Tensor]) -> None:
        """
        Put the given tensors into the named parameter slots.

        Raises:
            ContractError: Unknown parameter name
            DimensionError: Shape differs from the current parameter
        """
        current = dict(self.named_parameters())
        for name, tensor in tensors.items():
            if name not in current:
                raise ContractError(f"unknown parameter {name!r}")
            if tensor.shape != current[name].shape:
                raise DimensionError(
                    f"parameter {name!r}: expected shape {current[name].shape}, got {tensor.shape}"
                )
            owner, slot = self._resolve(name)
            if isinstance(owner, list):
                owner[int(slot)] = tensor
            else:
                setattr(owner, slot, tensor)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def sgd_step(self, lr: float) -> None:
        """
        Plain gradient descent: ``p <- p - lr * grad``.

        Parameters without a gradient are left in place; ``lr == 0`` leaves
        every parameter bit-identical.
        """
        if lr == 0:
            return
        updates = {}
        for name, p in self.named_parameters():
            if p.grad is None:
                continue
            updates[name] = Tensor(p.data - p.dtype.type(lr) * p.grad, requires_grad=True, dtype=p.dtype)
        self.bind_parameters(updates)

    # ========================================
    # Serialization
    # ========================================

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.numpy() for name, p in self.named_parameters()}

    def load_state_dict(self, arrays: Mapping[str, np.ndarray]) -> None:
        """
        Replace every parameter from ``arrays``.

        Raises:
            ContractError: Missing or unexpected names
        """
        expected = set(name for name, _ in self.named_parameters())
        missing = expected - set(arrays)
        unexpected = set(arrays) - expected
        if missing or unexpected:
            raise ContractError(
                f"state mismatch: missing {sorted(missing)[:5]}, unexpected {sorted(unexpected)[:5]}"
            )
        current = dict(self.named_parameters())
        self.bind_parameters({
            name: Tensor(np.asarray(value), requires_grad=True, dtype=current[name].dtype)
            for name, value in arrays.items()
        })
        logger.debug("loaded %d parameter tensors into %s", len(arrays), type(self).__name__)

    def __repr__(self) -> str:
        return f"<{type(self).__name__}(parameters={self.parameter_count()}, dtype={self.dtype.name})>"
