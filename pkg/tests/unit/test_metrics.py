"""Tests for pixel- and target-level detection metrics."""

import numpy as np
import pytest

from lohgnet.core.errors import ContractError, DimensionError, InputError
from lohgnet.data.pgm import write_pgm
from lohgnet.schemas.report import DetectionReport
from lohgnet.services.metrics import (
    aggregate,
    binarize,
    components,
    evaluate,
    evaluate_directories,
    evaluate_image,
    niou,
    pixel_metrics,
    target_metrics,
)
from lohgnet.services.oracles import naive_aggregate, naive_image_metrics


def _scene():
    """Two targets, one found with a shifted block, plus one stray pixel."""
    gt = np.zeros((40, 50), dtype=np.uint8)
    gt[10:12, 10:12] = 1
    gt[30, 40] = 1
    pred = np.zeros_like(gt)
    pred[10:12, 11:13] = 1
    pred[0, 0] = 1
    return pred, gt


class TestPixelMetrics:
    def test_hand_example(self):
        pred, gt = _scene()
        metrics = pixel_metrics(pred, gt)
        assert (metrics.tp, metrics.fp, metrics.fn) == (2, 3, 3)
        assert metrics.iou == pytest.approx(0.25)
        assert metrics.precision == pytest.approx(0.4)
        assert metrics.f_measure == pytest.approx(0.4)

    def test_one_third(self):
        pred = np.array([[1, 1, 0]], dtype=np.uint8)
        gt = np.array([[0, 1, 1]], dtype=np.uint8)
        assert pixel_metrics(pred, gt).iou == pytest.approx(1 / 3)

    def test_both_empty(self):
        empty = np.zeros((4, 4), dtype=np.uint8)
        metrics = pixel_metrics(empty, empty)
        assert metrics.iou == 1.0
        assert metrics.f_measure == 1.0

    def test_one_side_empty(self):
        full = np.ones((2, 2), dtype=np.uint8)
        assert pixel_metrics(np.zeros_like(full), full).iou == 0.0
        assert pixel_metrics(full, np.zeros_like(full)).f_measure == 0.0

    def test_non_binary_rejected(self):
        with pytest.raises(ContractError):
            pixel_metrics(np.full((2, 2), 0.5), np.zeros((2, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            pixel_metrics(np.zeros((2, 2)), np.zeros((3, 3)))

    def test_leading_singleton_axes_accepted(self):
        pred, gt = _scene()
        assert pixel_metrics(pred[np.newaxis], gt[np.newaxis, np.newaxis]).tp == 2

    def test_niou_is_mean_of_image_ious(self):
        assert niou([(1, 2, 2), (0, 0, 0)]) == pytest.approx((1 / 3 + 1) / 2)
        with pytest.raises(ContractError):
            niou([])


class TestBinarize:
    def test_strict_threshold(self):
        assert binarize(np.array([0.2, 0.5, 0.51])).tolist() == [0, 0, 1]
        assert binarize(np.array([0.2, 0.5]), threshold=0.1).tolist() == [1, 1]

    def test_threshold_range(self):
        with pytest.raises(ContractError):
            binarize(np.zeros(2), threshold=1.0)


class TestTargetMetrics:
    def test_hand_example(self):
        pred, gt = _scene()
        metrics = target_metrics(pred, gt)
        assert (metrics.targets, metrics.detected) == (2, 1)
        assert metrics.pd == 0.5
        assert metrics.false_pixels == 1
        assert metrics.fa == pytest.approx(5e-4)
        assert metrics.matches[0].distance == pytest.approx(1.0)

    def test_radius_is_strict(self):
        gt = np.zeros((10, 10), dtype=np.uint8)
        gt[5, 2] = 1
        pred = np.zeros_like(gt)
        pred[5, 5] = 1
        assert target_metrics(pred, gt).detected == 0
        assert target_metrics(pred, gt, radius=3.01).detected == 1

    def test_closest_component_wins(self):
        gt = np.zeros((20, 20), dtype=np.uint8)
        gt[10, 10] = 1
        pred = np.zeros_like(gt)
        pred[10, 11] = 1
        pred[10, 13] = 1
        metrics = target_metrics(pred, gt)
        assert metrics.detected == 1
        assert metrics.matches[0].component == 0
        assert metrics.false_pixels == 1

    def test_diagonal_pixels_are_one_component(self):
        mask = np.eye(4, dtype=np.uint8)
        found = components(mask)
        assert len(found) == 1
        assert found[0][1] == 4
        assert np.allclose(found[0][0], [1.5, 1.5])

    def test_no_targets(self):
        pred = np.zeros((8, 8), dtype=np.uint8)
        pred[2, 2] = 1
        metrics = target_metrics(pred, np.zeros_like(pred))
        assert metrics.pd == 1.0
        assert metrics.fa == pytest.approx(1 / 64)

    def test_missed_everything(self):
        gt = np.zeros((8, 8), dtype=np.uint8)
        gt[4, 4] = 1
        metrics = target_metrics(np.zeros_like(gt), gt)
        assert metrics.pd == 0.0
        assert metrics.fa == 0.0


class TestAggregate:
    def test_matches_naive_scan(self, rng):
        pairs = []
        for index in range(12):
            pred = (rng.random((24, 24)) > 0.93).astype(np.uint8)
            gt = (rng.random((24, 24)) > 0.95).astype(np.uint8)
            pairs.append((f"{index:04d}", pred, gt))
        report = evaluate(pairs)
        naive = naive_aggregate([naive_image_metrics(pred, gt) for _, pred, gt in pairs])
        for key, value in naive.items():
            assert getattr(report, key) == pytest.approx(value, abs=1e-12), key

    def test_pools_counts(self):
        pred, gt = _scene()
        report = aggregate([evaluate_image("a", pred, gt), evaluate_image("b", gt, gt)])
        assert report.tp == 2 + 5
        assert report.iou == pytest.approx(7 / (7 + 3 + 3))
        assert report.niou == pytest.approx((0.25 + 1.0) / 2)
        assert report.pd == pytest.approx(3 / 4)
        assert report.fa == pytest.approx(1 / 4000)

    def test_empty_set(self):
        with pytest.raises(ContractError):
            aggregate([])


class TestReport:
    def _report(self) -> DetectionReport:
        pred, gt = _scene()
        return evaluate([("0000", pred, gt)])

    def test_summary_lines(self):
        lines = self._report().summary_lines()
        assert lines[0] == "IoU    0.2500"
        assert lines[3] == "Pd     0.5000"
        assert lines[4] == "Fa     500.00 x 1e-6"

    def test_json_round_trip(self, tmp_path):
        report = self._report()
        path = report.write_json(tmp_path / "out" / "report.json")
        assert DetectionReport.model_validate_json(path.read_text()) == report

    def test_csv(self, tmp_path):
        rows = self._report().write_csv(tmp_path / "report.csv").read_text().splitlines()
        assert rows[0] == "image,tp,fp,fn,iou,targets,detected,false_pixels,pixels"
        assert rows[1].startswith("0000,2,3,3,0.25,2,1,1,2000")


class TestDirectories:
    def _write(self, directory, name, mask):
        write_pgm(directory / f"{name}.pgm", mask.astype(np.float64), bits=8)

    def test_pairs_by_name(self, tmp_path):
        pred, gt = _scene()
        self._write(tmp_path / "pred", "0000", pred)
        self._write(tmp_path / "pred", "extra", gt)
        self._write(tmp_path / "gt", "0000", gt)
        report = evaluate_directories(tmp_path / "pred", tmp_path / "gt")
        assert [image.image for image in report.images] == ["0000"]
        assert report.iou == pytest.approx(0.25)

    def test_dataset_root_as_ground_truth(self, dataset_dir):
        report = evaluate_directories(dataset_dir, dataset_dir)
        assert report.iou == 1.0
        assert report.pd == 1.0
        assert report.fa == 0.0

    def test_missing_prediction(self, tmp_path):
        _, gt = _scene()
        self._write(tmp_path / "gt", "0000", gt)
        self._write(tmp_path / "pred", "0001", gt)
        with pytest.raises(InputError):
            evaluate_directories(tmp_path / "pred", tmp_path / "gt")

    def test_missing_directory(self, tmp_path):
        with pytest.raises(InputError):
            evaluate_directories(tmp_path / "nope", tmp_path / "nope")
