"""
The assembled detection network.

    image -> Lorentz encoder  L1..L5 ┐
          -> Euclidean encoder E1..E5 ┴> fuse F1..F5 -> HORL(F5) -> decoder -> probs

Checkpoints are LOHGW001 containers whose ``meta`` carries the network
config, so ``LoHGNet.load`` rebuilds the same architecture before loading.
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from lohgnet.config.network import NetworkConfig
from lohgnet.core.errors import ContractError, DimensionError, FormatError
from lohgnet.geometry.maps import LorentzFeatureMap
from lohgnet.models.base import Module
from lohgnet.models.euclidean_branch import EuclideanEncoder
from lohgnet.models.fusion_decoder import Decoder, FusedPyramid, PredictionMap, fuse
from lohgnet.models.horl import HORL, HypergraphState
from lohgnet.models.lorentz_encoder import LorentzEncoder
from lohgnet.numerics.tensor import DTYPES, Tensor, no_grad, precision
from lohgnet.numerics.weights import load_weights, save_weights

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "lohgnet-checkpoint"


class LoHGNet(Module):
    """
    Dual-branch encoder, HORL and decoder built from a ``NetworkConfig``.

    Parameters are drawn from ``np.random.default_rng(config.seed)`` in a
    fixed order, so equal configs give bit-identical initial weights.
    """

    def __init__(self, config: NetworkConfig):
        dtype = DTYPES[config.precision]
        super().__init__(dtype)
        self.config = config
        rng = np.random.default_rng(config.seed)
        widths = config.widths
        k = config.curvature

        with precision(config.precision):
            if config.lorentz_branch:
                self.lorentz = LorentzEncoder(
                    widths, k, rng,
                    reduction=config.attention_reduction,
                    residual=config.galrcm_residual,
                    attention=config.galrcm_attention,
                )
            if config.euclidean_branch:
                self.euclidean = EuclideanEncoder(widths, rng)
            if config.horl:
                self.horl = HORL(
                    widths[-1],
                    config.vertex_width,
                    config.resolved_hyperedges,
                    rng,
                    sparsity=config.sparsity,
                    degree_eps=config.degree_eps,
                    hypergraph=config.horl_hypergraph,
                )
            self.decoder = Decoder(widths, rng)
        logger.debug("built %r from config seed %d", self, config.seed)

    # ========================================
    # Forward
    # ========================================

    def as_input(self, image: Union[Tensor, np.ndarray]) -> Tensor:
        """Accept H x W, 1 x H x W or B x 1 x H x W images."""
        if isinstance(image, Tensor):
            return image
        array = np.asarray(image)
        while array.ndim < 4:
            array = array[np.newaxis]
        if array.shape[1] != 1:
            raise DimensionError(f"expected single-channel images, got {array.shape}")
        return Tensor(array, dtype=self.dtype)

    def lorentz_features(self, x: Tensor) -> Optional[List[LorentzFeatureMap]]:
        return self.lorentz(x) if hasattr(self, "lorentz") else None

    def encode(self, x: Tensor) -> FusedPyramid:
        """Fused pyramid F1..F5 before HORL."""
        euclidean = self.euclidean(x).features if hasattr(self, "euclidean") else None
        return fuse(self.lorentz_features(x), euclidean)

    def forward(self, image: Union[Tensor, np.ndarray]) -> PredictionMap:
        x = self.as_input(image)
        fused = self.encode(x)
        if hasattr(self, "horl"):
            fused = fused.with_deepest(self.horl(fused.features[-1]))
        return self.decoder(fused)

    def predict(self, image: Union[Tensor, np.ndarray]) -> np.ndarray:
        """Probabilities without recording a graph, B x 1 x H x W."""
        with no_grad():
            return self(image).numpy()

    def hypergraph_states(self, image: Union[Tensor, np.ndarray]) -> List[HypergraphState]:
        if not hasattr(self, "horl") or not self.horl.hypergraph:
            raise ContractError("this network was built without the hypergraph")
        with no_grad():
            return self.horl.states(self.encode(self.as_input(image)).features[-1])

    # ========================================
    # Checkpoints
    # ========================================

    def save(self, path: Path) -> None:
        meta = {"kind": CHECKPOINT_KIND, "config": self.config.model_dump(mode="json")}
        save_weights(path, self.state_dict(), meta)
        logger.info("wrote checkpoint %s (%d parameters)", path, self.parameter_count())

    @classmethod
    def load(cls, path: Path) -> "LoHGNet":
        """
        Rebuild the network recorded in a checkpoint.

        Raises:
            InputError: File missing
            FormatError: Not a LOHGW001 checkpoint, or config missing
            ConfigError: Embedded config invalid
        """
        arrays, meta = load_weights(path)
        if meta.get("kind") != CHECKPOINT_KIND or "config" not in meta:
            raise FormatError(f"{path} is a weight container but not a network checkpoint")
        model = cls(NetworkConfig.build(meta["config"]))
        try:
            model.load_state_dict(arrays)
        except (ContractError, DimensionError) as exc:
            raise FormatError(f"{path}: parameters do not match the recorded config ({exc})") from exc
        return model
