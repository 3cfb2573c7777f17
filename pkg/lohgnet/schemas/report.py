"""
Evaluation report schemas.

``DetectionReport`` serializes to JSON with every count behind every ratio,
and to a CSV with one summary row per image.
"""

import csv
from pathlib import Path
from typing import List

from pydantic import BaseModel, Field

from lohgnet.core.constants import FA_DISPLAY_SCALE

CSV_COLUMNS = ("image", "tp", "fp", "fn", "iou", "targets", "detected", "false_pixels", "pixels")


class TargetMatch(BaseModel):
    """A ground-truth target matched to a predicted component."""

    target: int = Field(description="Index of the ground-truth component")
    component: int = Field(description="Index of the predicted component")
    distance: float = Field(ge=0.0, description="Centroid distance in pixels")


class ImageResult(BaseModel):
    """Counts and per-image IoU for one prediction/ground-truth pair."""

    image: str
    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    fn: int = Field(ge=0)
    iou: float = Field(ge=0.0, le=1.0)
    targets: int = Field(ge=0, description="Ground-truth components")
    detected: int = Field(ge=0, description="Ground-truth components matched")
    false_pixels: int = Field(ge=0, description="Pixels of unmatched predicted components")
    pixels: int = Field(ge=1)
    matches: List[TargetMatch] = Field(default_factory=list)

    def csv_row(self) -> List[object]:
        return [getattr(self, column) for column in CSV_COLUMNS]


class DetectionReport(BaseModel):
    """
    Aggregate pixel- and target-level metrics over a set of images.

    Pixel ratios pool counts over all images; ``niou`` is the mean of the
    per-image IoUs. ``fa`` is false pixels per image pixel (the CLI prints
    it scaled by 1e6).
    """

    images: List[ImageResult]
    iou: float = Field(ge=0.0, le=1.0)
    niou: float = Field(ge=0.0, le=1.0)
    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f_measure: float = Field(ge=0.0, le=1.0)
    pd: float = Field(ge=0.0, le=1.0)
    fa: float = Field(ge=0.0)
    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    fn: int = Field(ge=0)
    targets: int = Field(ge=0)
    detected: int = Field(ge=0)
    false_pixels: int = Field(ge=0)
    pixels: int = Field(ge=0)

    def summary_lines(self) -> List[str]:
        return [
            f"IoU    {self.iou:.4f}",
            f"nIoU   {self.niou:.4f}",
            f"F      {self.f_measure:.4f}",
            f"Pd     {self.pd:.4f}",
            f"Fa     {self.fa * FA_DISPLAY_SCALE:.2f} x 1e-6",
        ]

    def write_json(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for result in self.images:
                writer.writerow(result.csv_row())
        return path
