"""
Lorentz-model geometry: point primitives and their per-pixel variants.
"""

from lohgnet.geometry.lorentz import (
    Curvature,
    LorentzPoint,
    TangentVector,
    exp_map_origin,
    geodesic_distance,
    log_map_origin,
    lorentz_inner,
    origin,
    project_to_manifold,
    reconstruct_time,
)
from lohgnet.geometry.maps import LorentzFeatureMap, from_spatial, log_map_spatial, project_map

__all__ = [
    "Curvature",
    "LorentzPoint",
    "TangentVector",
    "exp_map_origin",
    "geodesic_distance",
    "log_map_origin",
    "lorentz_inner",
    "origin",
    "project_to_manifold",
    "reconstruct_time",
    "LorentzFeatureMap",
    "from_spatial",
    "log_map_spatial",
    "project_map",
]
