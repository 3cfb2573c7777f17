"""
Dataset manifest schema (``manifest.json`` of a generated dataset).
"""

from typing import List, Tuple

from pydantic import BaseModel, Field

from lohgnet.data.synth import SceneSpec

MANIFEST_VERSION = 1


class DatasetEntry(BaseModel):
    """One image/mask pair and the seed that produced it."""

    index: int = Field(ge=0)
    seed: int = Field(ge=0, lt=2 ** 64)
    image: str = Field(description="Path relative to the dataset root")
    mask: str = Field(description="Path relative to the dataset root")
    centroids: List[Tuple[float, float]] = Field(default_factory=list, description="(row, col) per target")


class Manifest(BaseModel):
    """
    Everything needed to regenerate a dataset bit-identically.

    ``spec`` is the scene template; each entry overrides its seed.
    """

    version: int = MANIFEST_VERSION
    seed: int = Field(ge=0, lt=2 ** 64)
    count: int = Field(ge=0)
    spec: SceneSpec
    entries: List[DatasetEntry]
