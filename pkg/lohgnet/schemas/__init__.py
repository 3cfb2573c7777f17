"""
Pydantic schemas for files the library writes: evaluation reports and
dataset manifests.
"""

from lohgnet.schemas.manifest import DatasetEntry, Manifest
from lohgnet.schemas.report import DetectionReport, ImageResult, TargetMatch

__all__ = [
    "DatasetEntry",
    "Manifest",
    "DetectionReport",
    "ImageResult",
    "TargetMatch",
]
