"""
Detection metrics service.

Pixel level: IoU, precision, recall and F over binary masks; nIoU as the
mean of per-image IoUs. Target level: 8-connected components of both
masks; a ground-truth target is detected when an unused predicted component
has its centroid strictly closer than ``radius`` pixels, matched greedily
by increasing distance. Pixels of predicted components left unmatched are
false alarms, reported per image pixel.

Conventions when a mask is empty: IoU and F are 1 when both masks are
empty and 0 when exactly one is; Pd is 1 when there are no targets.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
from skimage import measure

from lohgnet.core.errors import ContractError, DimensionError, InputError
from lohgnet.data.dataset import load_mask_dir
from lohgnet.schemas.report import DetectionReport, ImageResult, TargetMatch

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5
MATCH_RADIUS = 3.0
CONNECTIVITY = 2  # 8-connectivity in 2-D


# ========================================
# Result Types
# ========================================

@dataclass(frozen=True)
class PixelMetrics:
    tp: int
    fp: int
    fn: int
    iou: float
    precision: float
    recall: float
    f_measure: float


@dataclass
class TargetMetrics:
    """Target-level counts for one image."""

    targets: int
    detected: int
    false_pixels: int
    pixels: int
    matches: List[TargetMatch] = field(default_factory=list)

    @property
    def pd(self) -> float:
        return self.detected / self.targets if self.targets else 1.0

    @property
    def fa(self) -> float:
        return self.false_pixels / self.pixels


# ========================================
# Helpers
# ========================================

def _as_mask(mask: np.ndarray, name: str) -> np.ndarray:
    array = np.asarray(mask)
    while array.ndim > 2 and array.shape[0] == 1:
        array = array[0]
    if array.ndim != 2:
        raise DimensionError(f"{name} must be a single 2-D mask, got shape {np.shape(mask)}")
    if not np.all((array == 0) | (array == 1)):
        raise ContractError(f"{name} is not binary")
    return array.astype(bool)


def _pair(pred: np.ndarray, gt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pred, gt = _as_mask(pred, "prediction"), _as_mask(gt, "ground truth")
    if pred.shape != gt.shape:
        raise DimensionError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    return pred, gt


def _ratio(num: int, den: int, empty: float) -> float:
    return num / den if den else empty


def _f_measure(precision: float, recall: float) -> float:
    total = precision + recall
    return 2 * precision * recall / total if total > 0 else 0.0


# ========================================
# Operations
# ========================================

def binarize(pred: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """``pred > threshold`` as uint8 (strict comparison)."""
    if not 0 < threshold < 1:
        raise ContractError(f"threshold must lie in (0, 1), got {threshold}")
    return (np.asarray(pred) > threshold).astype(np.uint8)


def predict_mask(model, image: np.ndarray) -> np.ndarray:
    """Binarized 1 x H x W prediction of a network at its configured threshold."""
    return binarize(model.predict(image)[0], model.config.threshold)


def pixel_metrics(pred_mask: np.ndarray, gt_mask: np.ndarray) -> PixelMetrics:
    pred, gt = _pair(pred_mask, gt_mask)
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    precision = _ratio(tp, tp + fp, 1.0 if fn == 0 else 0.0)
    recall = _ratio(tp, tp + fn, 1.0 if fp == 0 else 0.0)
    return PixelMetrics(
        tp=tp,
        fp=fp,
        fn=fn,
        iou=_ratio(tp, tp + fp + fn, 1.0),
        precision=precision,
        recall=recall,
        f_measure=_f_measure(precision, recall),
    )


def niou(per_image: Sequence[Tuple[int, int, int]]) -> float:
    """
    Mean over images of ``TP / (T + P - TP)``.

    Args:
        per_image: (TP, T, P) per image, T and P being ground-truth and
            predicted positive pixel counts
    """
    if not per_image:
        raise ContractError("nIoU needs at least one image")
    return float(np.mean([_ratio(tp, t + p - tp, 1.0) for tp, t, p in per_image]))


def components(mask: np.ndarray, connectivity: int = CONNECTIVITY) -> List[Tuple[np.ndarray, int]]:
    """(centroid (row, col), area) of every connected component, in label order."""
    labels = measure.label(mask, connectivity=connectivity)
    return [(np.asarray(region.centroid), int(region.area)) for region in measure.regionprops(labels)]


def target_metrics(
    pred_mask: np.ndarray,
    gt_mask: np.ndarray,
    radius: float = MATCH_RADIUS,
    connectivity: int = CONNECTIVITY,
) -> TargetMetrics:
    """Match predicted components to ground-truth targets by centroid distance."""
    pred, gt = _pair(pred_mask, gt_mask)
    predicted = components(pred, connectivity)
    targets = components(gt, connectivity)

    candidates = sorted(
        (float(np.linalg.norm(t_centroid - p_centroid)), t, p)
        for t, (t_centroid, _) in enumerate(targets)
        for p, (p_centroid, _) in enumerate(predicted)
    )
    used_targets, used_components = set(), set()
    matches = []
    for distance, t, p in candidates:
        if distance >= radius:
            break
        if t in used_targets or p in used_components:
            continue
        used_targets.add(t)
        used_components.add(p)
        matches.append(TargetMatch(target=t, component=p, distance=distance))

    false_pixels = sum(area for p, (_, area) in enumerate(predicted) if p not in used_components)
    return TargetMetrics(
        targets=len(targets),
        detected=len(matches),
        false_pixels=false_pixels,
        pixels=int(pred.size),
        matches=matches,
    )


def evaluate_image(
    name: str,
    pred_mask: np.ndarray,
    gt_mask: np.ndarray,
    radius: float = MATCH_RADIUS,
) -> ImageResult:
    pixel = pixel_metrics(pred_mask, gt_mask)
    target = target_metrics(pred_mask, gt_mask, radius)
    return ImageResult(
        image=name,
        tp=pixel.tp,
        fp=pixel.fp,
        fn=pixel.fn,
        iou=pixel.iou,
        targets=target.targets,
        detected=target.detected,
        false_pixels=target.false_pixels,
        pixels=target.pixels,
        matches=target.matches,
    )


def aggregate(results: Sequence[ImageResult]) -> DetectionReport:
    """Pool per-image counts into a report."""
    if not results:
        raise ContractError("cannot aggregate an empty set of images")
    tp = sum(r.tp for r in results)
    fp = sum(r.fp for r in results)
    fn = sum(r.fn for r in results)
    targets = sum(r.targets for r in results)
    detected = sum(r.detected for r in results)
    false_pixels = sum(r.false_pixels for r in results)
    pixels = sum(r.pixels for r in results)

    precision = _ratio(tp, tp + fp, 1.0 if fn == 0 else 0.0)
    recall = _ratio(tp, tp + fn, 1.0 if fp == 0 else 0.0)
    return DetectionReport(
        images=list(results),
        iou=_ratio(tp, tp + fp + fn, 1.0),
        niou=niou([(r.tp, r.tp + r.fn, r.tp + r.fp) for r in results]),
        precision=precision,
        recall=recall,
        f_measure=_f_measure(precision, recall),
        pd=_ratio(detected, targets, 1.0),
        fa=false_pixels / pixels,
        tp=tp,
        fp=fp,
        fn=fn,
        targets=targets,
        detected=detected,
        false_pixels=false_pixels,
        pixels=pixels,
    )


def evaluate(
    pairs: Sequence[Tuple[str, np.ndarray, np.ndarray]],
    radius: float = MATCH_RADIUS,
) -> DetectionReport:
    """
    Evaluate (name, predicted mask, ground-truth mask) triples.

    Example:
        report = evaluate([("0000", pred, gt)])
        print(report.iou, report.pd, report.fa)
    """
    report = aggregate([evaluate_image(name, pred, gt, radius) for name, pred, gt in pairs])
    logger.info("evaluated %d images: IoU %.4f Pd %.4f", len(pairs), report.iou, report.pd)
    return report


def evaluate_directories(pred_dir: Path, gt_dir: Path, radius: float = MATCH_RADIUS) -> DetectionReport:
    """
    Evaluate every ground-truth mask against the same-named predicted mask.

    Raises:
        InputError: Either directory missing/empty, or a prediction missing
    """
    predictions = dict(load_mask_dir(pred_dir))
    pairs = []
    for name, gt in load_mask_dir(gt_dir):
        if name not in predictions:
            raise InputError(f"no prediction named {name}.pgm in {pred_dir}")
        pairs.append((name, predictions[name], gt))
    return evaluate(pairs, radius)
