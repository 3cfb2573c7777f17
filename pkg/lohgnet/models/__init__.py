"""
Network components.

Contains the module base class, the Lorentz and Euclidean encoders, HORL,
the fusion decoder and the assembled network.
"""

from lohgnet.models.base import Module
from lohgnet.models.euclidean_branch import EuclideanEncoder, EuclideanPyramid
from lohgnet.models.fusion_decoder import Decoder, FusedPyramid, PredictionMap, soft_iou_loss
from lohgnet.models.horl import HORL, HypergraphState
from lohgnet.models.lorentz_encoder import GALRCM, LorentzEncoder
from lohgnet.models.network import LoHGNet

__all__ = [
    "Module",
    "EuclideanEncoder",
    "EuclideanPyramid",
    "Decoder",
    "FusedPyramid",
    "PredictionMap",
    "soft_iou_loss",
    "HORL",
    "HypergraphState",
    "GALRCM",
    "LorentzEncoder",
    "LoHGNet",
]
