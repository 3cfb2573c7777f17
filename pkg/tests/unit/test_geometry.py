"""Tests for Lorentz-model points and per-pixel maps."""

import math

import numpy as np
import pytest

from lohgnet.core.errors import ContractError, DimensionError, NumericError
from lohgnet.geometry import (
    Curvature,
    LorentzFeatureMap,
    LorentzPoint,
    TangentVector,
    exp_map_origin,
    from_spatial,
    geodesic_distance,
    log_map_origin,
    log_map_spatial,
    lorentz_inner,
    origin,
    project_map,
    project_to_manifold,
    reconstruct_time,
)
from lohgnet.geometry import lorentz, maps
from lohgnet.numerics import Tensor, gradcheck, ops

SQRT2 = math.sqrt(2.0)


class TestPoints:
    def test_inner_at_origin(self):
        o = origin(2)
        assert lorentz_inner(o, o) == -1.0

    def test_inner_on_manifold_point(self):
        x = np.array([2.0, 1.0, SQRT2])
        assert lorentz_inner(x, x) == pytest.approx(-1.0, abs=1e-12)
        assert lorentz_inner(origin(2), x) == -2.0

    def test_inner_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            lorentz_inner(np.ones(3), np.ones(4))

    def test_reconstruct_time(self):
        assert reconstruct_time(np.zeros(2)).t == 1.0
        point = reconstruct_time([3.0, 4.0])
        assert point.t == pytest.approx(math.sqrt(26.0), abs=1e-12)
        assert point.residual() <= 1e-9

    def test_reconstruct_time_rejects_nan(self):
        with pytest.raises(NumericError):
            reconstruct_time([np.nan, 1.0])

    def test_reconstruct_time_scales_with_curvature(self, rng):
        k = Curvature(2.5)
        point = reconstruct_time(rng.standard_normal(5), k)
        assert point.residual() <= 1e-9
        assert point.validate() is point

    def test_project_ignores_time_slot(self):
        point = project_to_manifold([999.0, 3.0, 4.0])
        assert point.t == pytest.approx(math.sqrt(26.0))
        assert np.array_equal(point.s, [3.0, 4.0])

    def test_project_is_idempotent(self, rng):
        first = reconstruct_time(rng.standard_normal(4))
        second = project_to_manifold(first.vector)
        assert np.allclose(first.vector, second.vector, atol=1e-12)

    def test_project_rejects_short_vector(self):
        with pytest.raises(DimensionError):
            project_to_manifold([1.0])

    def test_validate_rejects_off_manifold(self):
        with pytest.raises(ContractError):
            LorentzPoint(t=2.0, s=np.array([0.0, 0.0])).validate()

    def test_curvature_must_be_positive(self):
        with pytest.raises(ContractError):
            Curvature(0.0)

    def test_distance_values(self):
        o = origin(2)
        assert geodesic_distance(o, o) == 0.0
        x = LorentzPoint(t=2.0, s=np.array([1.0, SQRT2]))
        assert geodesic_distance(o, x) == pytest.approx(math.log(2 + math.sqrt(3)), abs=1e-12)
        assert geodesic_distance(o, x) == pytest.approx(1.316958, abs=1e-6)

    def test_distance_curvature_mismatch(self):
        x = reconstruct_time([1.0, 0.0], Curvature(2.0))
        with pytest.raises(ContractError):
            geodesic_distance(origin(2), x)

    def test_distance_reads_time_slot_off_manifold(self):
        x = LorentzPoint(t=5.0, s=np.zeros(2))
        assert geodesic_distance(origin(2), x) == pytest.approx(math.acosh(5.0), abs=1e-12)

    def test_distance_clamps_below_origin_time(self):
        x = LorentzPoint(t=0.5, s=np.zeros(2))
        assert geodesic_distance(origin(2), x) == 0.0

    def test_time_based_form_agrees_on_manifold(self, rng):
        for _ in range(20):
            k = float(rng.uniform(0.5, 2.0))
            x = reconstruct_time(rng.standard_normal(3) * rng.uniform(0.5, 3.0), Curvature(k))
            assert lorentz.distance0_from_time(x.vector, k) == pytest.approx(
                lorentz.distance0(x.vector, k), rel=1e-9
            )


class TestMaps:
    def test_log_of_origin_is_zero(self):
        assert np.array_equal(log_map_origin(origin(3)).v, np.zeros(4))

    def test_log_along_first_axis(self):
        x = LorentzPoint(t=math.cosh(1.0), s=np.array([math.sinh(1.0), 0.0]))
        assert np.allclose(log_map_origin(x).v, [0.0, 1.0, 0.0], atol=1e-12)

    def test_exp_values(self):
        assert np.allclose(exp_map_origin(TangentVector(np.zeros(3))).vector, origin(2).vector)
        point = exp_map_origin(TangentVector(np.array([0.0, 1.0, 0.0])))
        assert np.allclose(point.vector, [math.cosh(1.0), math.sinh(1.0), 0.0], atol=1e-12)

    def test_round_trip_f64(self, rng):
        for _ in range(200):
            direction = rng.standard_normal(4)
            v = np.concatenate([[0.0], direction / np.linalg.norm(direction) * rng.uniform(1e-3, 5.0)])
            back = log_map_origin(exp_map_origin(TangentVector(v))).v
            assert np.linalg.norm(back - v) / np.linalg.norm(v) <= 1e-10

    def test_log_norm_is_distance(self, rng):
        for _ in range(50):
            x = reconstruct_time(rng.standard_normal(3) * 2)
            assert log_map_origin(x).norm == pytest.approx(geodesic_distance(origin(3), x), rel=1e-12)


@pytest.mark.usefixtures("f64")
class TestFeatureMaps:
    def test_needs_a_spatial_channel(self):
        with pytest.raises(DimensionError):
            LorentzFeatureMap(Tensor(np.ones((1, 1, 2, 2))))

    def test_from_spatial_is_on_manifold(self, rng):
        fmap = from_spatial(Tensor(rng.standard_normal((2, 4, 3, 3)) * 3), k=1.5)
        assert fmap.residual() <= 1e-9
        assert fmap.min_time() >= math.sqrt(1.5)

    def test_project_map_drops_time(self, rng):
        raw = rng.standard_normal((1, 3, 2, 2))
        fmap = project_map(Tensor(raw), 1.0)
        assert np.array_equal(fmap.space.data, raw[:, 1:])
        assert fmap.residual() <= 1e-9

    def test_origin_map_logs_to_zero(self):
        fmap = from_spatial(Tensor(np.zeros((1, 3, 2, 2))), 1.0)
        assert np.array_equal(maps.log_map(fmap), np.zeros((1, 4, 2, 2)))
        assert np.array_equal(log_map_spatial(fmap).data, np.zeros((1, 3, 2, 2)))

    def test_log_map_matches_pixel_loop(self, rng):
        fmap = maps.reconstruct_map(rng.standard_normal((1, 4, 3, 3)), 1.0)
        batched = maps.log_map(fmap)
        for i in range(3):
            for j in range(3):
                point = LorentzPoint(t=float(fmap.data.data[0, 0, i, j]), s=fmap.data.data[0, 1:, i, j])
                assert np.allclose(batched[0, :, i, j], log_map_origin(point).v, atol=1e-12)

    def test_distance_map_matches_points(self, rng):
        fmap = maps.reconstruct_map(rng.standard_normal((2, 3, 2, 2)), 1.0)
        distances = maps.distance_map(fmap)
        point = LorentzPoint(t=float(fmap.data.data[1, 0, 1, 0]), s=fmap.data.data[1, 1:, 1, 0])
        assert distances[1, 1, 0] == pytest.approx(geodesic_distance(origin(3), point))

    def test_exp_then_log_per_pixel(self, rng):
        v = rng.standard_normal((1, 4, 2, 3))
        v[:, 0] = 0.0
        assert np.allclose(maps.log_map(maps.exp_map(v, 1.0)), v, atol=1e-10)

    def test_log_map_spatial_matches_array_kernel(self, rng):
        space = rng.standard_normal((1, 3, 4, 4))
        space[0, :, 0, 0] *= 1e-3  # series branch
        fmap = from_spatial(Tensor(space), 2.0)
        assert np.allclose(log_map_spatial(fmap).data, maps.log_map(fmap)[:, 1:], rtol=1e-9, atol=1e-12)

    def test_time_channel_gradient(self, rng):
        weights = rng.standard_normal((1, 1, 3, 3))

        def graph(space):
            return ops.sum(ops.mul(maps.time_channel(space, 1.0), Tensor(weights)))

        report = gradcheck(graph, Tensor(rng.standard_normal((1, 4, 3, 3))), rel_tol=1e-6)
        assert report.passed, report.summary()

    def test_log_map_spatial_gradient(self, rng):
        weights = rng.standard_normal((1, 3, 3, 3))

        def graph(space):
            return ops.sum(ops.mul(log_map_spatial(from_spatial(space, 1.0)), Tensor(weights)))

        report = gradcheck(graph, Tensor(rng.standard_normal((1, 3, 3, 3))), rel_tol=1e-6)
        assert report.passed, report.summary()
