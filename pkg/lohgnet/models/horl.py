"""
High-order relation learning (HORL) on the deepest fused feature.

Pixels of one batch item are the N = H*W vertices of a hypergraph with M
learned hyperedges:

    V_f = W_v(F)          N x d   vertex representation
    g   = W_g(gap(F))     d       global guidance, used as diag(g)
    E_f = W_e(F)          N x M   hyperedge representation (7x7 conv)

    H   = |V_f diag(g) V_f^T E_f|                      incidence
    H_s = H * [H > lambda * mean(H)]                   sparsified incidence
    Dv  = rowsum(H_s) + eps,  De = colsum(H_s) + eps   degrees
    P_H = Dv^-1/2 H_s De^-1 H_s^T Dv^-1/2              interaction matrix
    F'  = F Theta - P_H F Theta                        propagation

The sparsification mask is a constant in the backward pass: gradients pass
through kept entries and stop at dropped ones.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from lohgnet.core.constants import DEGREE_EPS
from lohgnet.core.errors import ContractError, DimensionError
from lohgnet.models.base import Module
from lohgnet.models.layers import Conv2d
from lohgnet.numerics import ops
from lohgnet.numerics.tensor import Tensor

logger = logging.getLogger(__name__)

HYPEREDGE_KERNEL = 7
MAX_DUMP_VERTICES = 256
DUMP_FORMAT = "%.9g"


# ========================================
# Hypergraph State
# ========================================

@dataclass
class HypergraphState:
    """
    Intermediate matrices of one HORL pass over one batch item.

    Attributes:
        H: N x M incidence
        H_s: N x M sparsified incidence
        Dv: N vertex degrees (regularized)
        De: M hyperedge degrees (regularized)
        P_H: N x N interaction matrix
    """

    H: Tensor
    H_s: Tensor
    Dv: Tensor
    De: Tensor
    P_H: Tensor

    @property
    def vertices(self) -> int:
        return self.H.shape[0]

    @property
    def hyperedges(self) -> int:
        return self.H.shape[1]

    def arrays(self) -> Dict[str, np.ndarray]:
        return {
            "H": self.H.numpy(),
            "H_s": self.H_s.numpy(),
            "Dv": self.Dv.numpy(),
            "De": self.De.numpy(),
            "P_H": self.P_H.numpy(),
        }

    def dump_csv(self, directory: Path) -> List[Path]:
        """
        Write H, H_s, Dv, De and P_H as CSV (row-major, 9 significant digits).

        Degree vectors are written one value per line.

        Raises:
            ContractError: More than 256 vertices
        """
        if self.vertices > MAX_DUMP_VERTICES:
            raise ContractError(
                f"hypergraph dumps are limited to {MAX_DUMP_VERTICES} vertices, got {self.vertices}"
            )
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name, array in self.arrays().items():
            path = directory / f"{name}.csv"
            np.savetxt(path, array, fmt=DUMP_FORMAT, delimiter=",")
            written.append(path)
        logger.info("wrote hypergraph dump (%d vertices) to %s", self.vertices, directory)
        return written


# ========================================
# Functional Pipeline
# ========================================

def _item_matrix(x: Tensor, item: int) -> Tensor:
    """B x C x H x W -> N x C for one batch item (pixels row-major)."""
    _, channels, height, width = x.shape
    flat = ops.reshape(ops.narrow(x, 0, item, 1), (channels, height * width))
    return ops.transpose(flat)


def build_components(
    F: Tensor,
    w_v: Conv2d,
    w_g: Conv2d,
    w_e: Conv2d,
) -> List[Tuple[Tensor, Tensor, Tensor]]:
    """
    Vertex, guidance and hyperedge components per batch item.

    Returns:
        One (V_f: N x d, g: d, E_f: N x M) triple per batch item
    """
    if F.ndim != 4:
        raise DimensionError(f"HORL expects B x C x H x W, got {F.shape}")
    vertices = w_v(F)
    guidance = w_g(ops.gap(F))
    edges = w_e(F)
    width = guidance.shape[1]

    components = []
    for item in range(F.shape[0]):
        g = ops.reshape(ops.narrow(guidance, 0, item, 1), (width,))
        components.append((_item_matrix(vertices, item), g, _item_matrix(edges, item)))
    return components


def build_incidence(V_f: Tensor, g: Tensor, E_f: Tensor) -> Tensor:
    """``H = |V_f diag(g) V_f^T E_f|``, evaluated as ``|V_f (g * (V_f^T E_f))|``."""
    if V_f.ndim != 2 or E_f.ndim != 2 or V_f.shape[0] != E_f.shape[0]:
        raise DimensionError(f"incidence: V_f {V_f.shape} and E_f {E_f.shape} disagree on N")
    if g.shape != (V_f.shape[1],):
        raise DimensionError(f"incidence: guidance {g.shape} does not match width {V_f.shape[1]}")
    projected = ops.matmul(ops.transpose(V_f), E_f)
    guided = ops.mul(projected, ops.reshape(g, (g.shape[0], 1)))
    return ops.absolute(ops.matmul(V_f, guided))


def sparsify_mask(H: np.ndarray, sparsity: float) -> np.ndarray:
    """Entries strictly above ``sparsity * mean(H)`` (global mean)."""
    if sparsity < 0:
        raise ContractError(f"sparsity factor must be >= 0, got {sparsity}")
    return H > sparsity * H.mean()


def sparsify(H: Tensor, sparsity: float) -> Tensor:
    mask = sparsify_mask(H.data, sparsity)
    return ops.mul(H, Tensor(mask, dtype=H.dtype))


def interaction_matrix(H_s: Tensor, degree_eps: float = DEGREE_EPS) -> Tuple[Tensor, Tensor, Tensor]:
    """
    Degrees and normalized interaction matrix.

    Returns:
        (Dv: N, De: M, P_H: N x N)
    """
    if degree_eps <= 0:
        raise ContractError(f"degree regularizer must be positive, got {degree_eps}")
    vertices, edges = H_s.shape
    dv = ops.add(ops.sum(H_s, axis=1), degree_eps)
    de = ops.add(ops.sum(H_s, axis=0), degree_eps)
    scaled = ops.div(H_s, ops.reshape(ops.sqrt(dv), (vertices, 1)))
    P_H = ops.matmul(ops.div(scaled, ops.reshape(de, (1, edges))), ops.transpose(scaled))
    return dv, de, P_H


def propagate_matrix(F: Tensor, theta: Tensor, P_H: Optional[Tensor]) -> Tensor:
    """``F Theta - P_H F Theta`` on an N x C matrix (``P_H=None`` keeps F Theta)."""
    transformed = ops.matmul(F, theta)
    if P_H is None:
        return transformed
    return ops.sub(transformed, ops.matmul(P_H, transformed))


# ========================================
# Module
# ========================================

class HORL(Module):
    """
    Hypergraph propagation over the pixels of a C-channel map.

    Attributes:
        w_v: 1x1 conv C -> d
        w_g: 1x1 conv C -> d applied to gap(F)
        w_e: 7x7 conv C -> M
        theta: C x C transform, identity at initialization
    """

    def __init__(
        self,
        channels: int,
        vertex_width: int,
        hyperedges: int,
        rng: np.random.Generator,
        sparsity: float = 0.5,
        degree_eps: float = DEGREE_EPS,
        hypergraph: bool = True,
        dtype=None,
    ):
        super().__init__(dtype)
        if hyperedges < 1 or vertex_width < 1:
            raise ContractError(f"need M >= 1 and d >= 1, got M={hyperedges}, d={vertex_width}")
        if sparsity < 0 or degree_eps <= 0:
            raise ContractError(f"need lambda >= 0 and eps > 0, got {sparsity}, {degree_eps}")
        self.sparsity = sparsity
        self.degree_eps = degree_eps
        self.hypergraph = hypergraph
        if hypergraph:
            self.w_v = Conv2d(channels, vertex_width, 1, rng, init="lecun", dtype=dtype)
            self.w_g = Conv2d(channels, vertex_width, 1, rng, init="lecun", dtype=dtype)
            self.w_e = Conv2d(channels, hyperedges, HYPEREDGE_KERNEL, rng, init="lecun", dtype=dtype)
        self.theta = self.parameter(np.eye(channels))

    def states(self, F: Tensor) -> List[HypergraphState]:
        """Hypergraph of every batch item."""
        if not self.hypergraph:
            raise ContractError("HORL was built without the hypergraph")
        states = []
        for V_f, g, E_f in build_components(F, self.w_v, self.w_g, self.w_e):
            H = build_incidence(V_f, g, E_f)
            H_s = sparsify(H, self.sparsity)
            dv, de, P_H = interaction_matrix(H_s, self.degree_eps)
            states.append(HypergraphState(H, H_s, dv, de, P_H))
        return states

    def forward(self, F: Tensor) -> Tensor:
        if F.ndim != 4 or F.shape[1] != self.theta.shape[0]:
            raise DimensionError(f"HORL over {self.theta.shape[0]} channels got {F.shape}")
        batch, channels, height, width = F.shape
        interactions: List[Optional[Tensor]] = (
            [state.P_H for state in self.states(F)] if self.hypergraph else [None] * batch
        )

        outputs = []
        for item, P_H in enumerate(interactions):
            out = propagate_matrix(_item_matrix(F, item), self.theta, P_H)
            outputs.append(ops.reshape(ops.transpose(out), (1, channels, height, width)))
        return outputs[0] if batch == 1 else ops.concat(outputs, axis=0)


def propagate(F: Tensor, horl: HORL) -> Tensor:
    return horl(F)
