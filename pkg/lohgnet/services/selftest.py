"""
Invariant self-test.

Runs randomized property checks across the library and reports one
PASS/FAIL line per invariant:

- manifold membership, projection idempotence, log/exp round trip,
  log-norm/distance agreement, batched-vs-point consistency
- encoder output on the manifold (tiny preset, 32-bit)
- fusion exact at the origin
- matmul/conv2d against loop oracles
- hypergraph propagation against the dense oracle, spectral properties of
  the interaction matrix, monotone sparsification
- detection metrics against the full-scan oracle

``inject_fault`` perturbs reconstructed time components so the manifold
check must fail (negative control for ``lohgnet selftest``).
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np

from lohgnet.config import settings
from lohgnet.core.constants import PRESET_WIDTHS, ChannelPreset, Precision
from lohgnet.geometry import lorentz
from lohgnet.geometry.maps import distance_map, from_spatial, log_map, log_map_spatial
from lohgnet.models.fusion_decoder import fuse
from lohgnet.models.horl import HORL, interaction_matrix, propagate_matrix, sparsify_mask
from lohgnet.models.lorentz_encoder import LorentzEncoder
from lohgnet.numerics import ops
from lohgnet.numerics.tensor import Tensor, no_grad, precision
from lohgnet.services import oracles
from lohgnet.services.metrics import evaluate

logger = logging.getLogger(__name__)

ROUND_TRIP_TANGENTS = 1000
FAULT_OFFSET = 1e-3
ENCODER_SIZE = 64

CheckFn = Callable[[], Tuple[bool, str]]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:44s} {self.detail} ({self.seconds:.2f}s)"


@dataclass
class SelfTestReport:
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> List[str]:
        failed = sum(not r.passed for r in self.results)
        return [r.line() for r in self.results] + [f"{len(self.results)} checks, {failed} failed"]


class SelfTest:
    """
    Randomized invariant checks.

    Args:
        seed: Seed for every random instance
        instances: Random instances per check
        inject_fault: Break the manifold check on purpose
    """

    def __init__(self, seed: int = 0, instances: int = None, inject_fault: bool = False):
        self.seed = seed
        self.instances = instances or settings.selftest_instances
        self.inject_fault = inject_fault

    def checks(self) -> List[Tuple[str, CheckFn]]:
        return [
            ("manifold membership (f32, f64)", self.check_manifold),
            ("projection idempotent", self.check_projection),
            ("log/exp round trip (f32)", self.check_round_trip),
            ("log-map norm equals distance", self.check_log_distance),
            ("batched maps match point maps", self.check_batched),
            ("encoder output on manifold (tiny, f32)", self.check_encoder),
            ("fusion exact at origin", self.check_fuse_origin),
            ("matmul/conv2d loop oracles", self.check_dense_oracles),
            ("hypergraph dense oracle", self.check_hypergraph_oracle),
            ("interaction matrix spectrum", self.check_spectrum),
            ("sparsification monotone in lambda", self.check_sparsify_monotone),
            ("metrics full-scan oracle", self.check_metrics),
        ]

    def run(self) -> SelfTestReport:
        report = SelfTestReport()
        for name, check in self.checks():
            start = time.perf_counter()
            passed, detail = check()
            report.results.append(CheckResult(name, passed, detail, time.perf_counter() - start))
            logger.debug("selftest %s: %s", name, detail)
        return report

    def _rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    # ========================================
    # Geometry
    # ========================================

    def check_manifold(self) -> Tuple[bool, str]:
        rng = self._rng(1)
        worst = {}
        for dtype in (np.float32, np.float64):
            eps = lorentz.manifold_eps(dtype)
            excess = 0.0
            for _ in range(self.instances):
                k = float(rng.uniform(0.5, 2.0))
                s = (rng.standard_normal(8) * rng.uniform(0.1, 3.0)).astype(dtype)
                x = lorentz.reconstruct(s, k).astype(np.float64)
                if self.inject_fault:
                    x[0] += FAULT_OFFSET
                excess = max(excess, abs(lorentz.inner(x, x) + k) / eps)
            worst[np.dtype(dtype).name] = excess
        passed = all(value <= 1.0 for value in worst.values())
        detail = ", ".join(f"{name} residual/eps {value:.2e}" for name, value in worst.items())
        return passed, detail

    def check_projection(self) -> Tuple[bool, str]:
        rng = self._rng(2)
        for _ in range(self.instances):
            k = lorentz.Curvature(float(rng.uniform(0.5, 2.0)))
            raw = rng.standard_normal(6) * 3
            once = lorentz.project_to_manifold(raw, k)
            twice = lorentz.project_to_manifold(once.vector, k)
            if not np.array_equal(once.vector, twice.vector):
                return False, "second projection changed the point"
        return True, f"{self.instances} points bit-identical"

    def check_round_trip(self) -> Tuple[bool, str]:
        rng = self._rng(3)
        dim = 4
        directions = rng.standard_normal((dim, ROUND_TRIP_TANGENTS))
        directions /= np.linalg.norm(directions, axis=0)
        norms = np.exp(rng.uniform(np.log(1e-3), np.log(5.0), ROUND_TRIP_TANGENTS))
        v = np.concatenate([np.zeros((1, ROUND_TRIP_TANGENTS)), directions * norms]).astype(np.float32)
        back = lorentz.log0(lorentz.exp0(v, 1.0), 1.0)
        errors = np.linalg.norm(back.astype(np.float64) - v, axis=0) / np.linalg.norm(v.astype(np.float64), axis=0)
        worst = float(errors.max())
        return worst <= 1e-5, f"max rel err {worst:.2e} over {ROUND_TRIP_TANGENTS} tangents"

    def check_log_distance(self) -> Tuple[bool, str]:
        rng = self._rng(4)
        worst = 0.0
        for _ in range(self.instances):
            k = lorentz.Curvature(float(rng.uniform(0.5, 2.0)))
            x = lorentz.reconstruct_time(rng.standard_normal(5) * rng.uniform(0.01, 3.0), k)
            distance = lorentz.geodesic_distance(lorentz.origin(5, k), x)
            norm = lorentz.log_map_origin(x).norm
            worst = max(worst, abs(norm - distance) / distance)
        return worst <= 1e-6, f"max rel err {worst:.2e}"

    def check_batched(self) -> Tuple[bool, str]:
        rng = self._rng(5)
        space = rng.standard_normal((1, 4, 3, 3))
        with precision(Precision.F64):
            x = from_spatial(Tensor(space), 1.0)
        logs = log_map(x)
        distances = distance_map(x)
        worst = 0.0
        for i in range(3):
            for j in range(3):
                point = lorentz.reconstruct_time(space[0, :, i, j])
                worst = max(
                    worst,
                    float(np.max(np.abs(logs[0, :, i, j] - lorentz.log_map_origin(point).v))),
                    abs(float(distances[0, i, j]) - lorentz.geodesic_distance(lorentz.origin(4), point)),
                )
        return worst <= 1e-6, f"max abs err {worst:.2e} over 9 pixels"

    def check_encoder(self) -> Tuple[bool, str]:
        rng = self._rng(6)
        with precision(Precision.F32), no_grad():
            encoder = LorentzEncoder(PRESET_WIDTHS[ChannelPreset.TINY], 1.0, rng)
            image = Tensor(rng.random((1, 1, ENCODER_SIZE, ENCODER_SIZE)))
            maps = encoder(image)
        residual = max(m.residual() for m in maps)
        eps = lorentz.manifold_eps(np.float32)
        return residual <= eps, f"max residual {residual:.2e} over {len(maps)} scales"

    def check_fuse_origin(self) -> Tuple[bool, str]:
        rng = self._rng(7)
        with precision(Precision.F64), no_grad():
            shapes = [(1, 3, 8 // 2 ** i, 8 // 2 ** i) for i in range(4)] + [(1, 3, 1, 1)]
            lorentz_maps = [from_spatial(Tensor(np.zeros(shape)), 1.0) for shape in shapes]
            euclidean = [Tensor(rng.standard_normal(shape)) for shape in shapes]
            fused = fuse(lorentz_maps, euclidean)
            tangents = log_map_spatial(lorentz_maps[0])
        exact = all(np.array_equal(f.data, e.data) for f, e in zip(fused.features, euclidean))
        return exact and not np.any(tangents.data), "F_i == E_i" if exact else "fused map differs from E_i"

    # ========================================
    # Numerics
    # ========================================

    def check_dense_oracles(self) -> Tuple[bool, str]:
        rng = self._rng(8)
        worst = {Precision.F32: 0.0, Precision.F64: 0.0}
        for mode in worst:
            with precision(mode), no_grad():
                for _ in range(max(1, self.instances // 5)):
                    a, b = Tensor(rng.standard_normal((3, 4))), Tensor(rng.standard_normal((4, 5)))
                    ref = oracles.matmul_loop(a.data.astype(np.float64), b.data.astype(np.float64))
                    worst[mode] = max(worst[mode], float(np.max(np.abs(ops.matmul(a, b).data - ref))))

                    x = Tensor(rng.standard_normal((1, 2, 5, 5)))
                    w = Tensor(rng.standard_normal((3, 2, 3, 3)))
                    bias = Tensor(rng.standard_normal(3))
                    stride = int(rng.integers(1, 3))
                    ref = oracles.conv2d_loop(
                        x.data.astype(np.float64), w.data.astype(np.float64),
                        bias.data.astype(np.float64), stride, 1,
                    )
                    out = ops.conv2d(x, w, bias, stride, 1).data
                    worst[mode] = max(worst[mode], float(np.max(np.abs(out - ref))))
        passed = worst[Precision.F32] <= 1e-5 and worst[Precision.F64] <= 1e-10
        return passed, f"f32 {worst[Precision.F32]:.2e}, f64 {worst[Precision.F64]:.2e}"

    # ========================================
    # Hypergraph
    # ========================================

    def check_hypergraph_oracle(self) -> Tuple[bool, str]:
        rng = self._rng(9)
        worst = 0.0
        with precision(Precision.F64), no_grad():
            for _ in range(self.instances):
                height, width = int(rng.integers(1, 5)), int(rng.integers(1, 5))
                channels = int(rng.integers(2, 5))
                hyperedges = int(rng.integers(1, 9))
                horl = HORL(channels, math.ceil(channels / 2), hyperedges, rng)
                horl.bind_parameters({"theta": Tensor(rng.standard_normal((channels, channels)))})
                F = rng.standard_normal((1, channels, height, width))
                out = horl(Tensor(F)).data
                dense = oracles.dense_hypergraph(
                    F[0],
                    horl.w_v.weight.data[:, :, 0, 0], horl.w_v.bias.data,
                    horl.w_g.weight.data[:, :, 0, 0], horl.w_g.bias.data,
                    horl.w_e.weight.data, horl.w_e.bias.data,
                    horl.theta.data, horl.sparsity, horl.degree_eps,
                )
                worst = max(worst, float(np.max(np.abs(out[0] - dense.output))))

            H_s = Tensor(np.array([[1.0], [1.0]]))
            _, _, P_H = interaction_matrix(H_s)
            hand = propagate_matrix(Tensor(np.array([[1.0], [0.0]])), Tensor(np.eye(1)), P_H).data
        hand_ok = np.allclose(hand, [[0.5], [-0.5]], atol=1e-6, rtol=0)
        passed = worst <= 1e-5 and hand_ok
        return passed, f"max abs err {worst:.2e} over {self.instances} instances, hand example {'ok' if hand_ok else 'wrong'}"

    def check_spectrum(self) -> Tuple[bool, str]:
        rng = self._rng(10)
        asym = min_eig = identity = 0.0
        max_eig = -np.inf
        with precision(Precision.F64), no_grad():
            for _ in range(self.instances):
                vertices = int(rng.integers(2, 65))
                edges = int(rng.integers(1, 17))
                H = np.abs(rng.standard_normal((vertices, edges)))
                H_s = np.where(sparsify_mask(H, 0.5), H, 0.0)
                dv, _, P_H = interaction_matrix(Tensor(H_s))
                P = P_H.data
                eig = np.linalg.eigvalsh((P + P.T) / 2)
                asym = max(asym, float(np.max(np.abs(P - P.T))))
                min_eig = min(min_eig, float(eig.min()))
                max_eig = max(max_eig, float(eig.max()))
                if np.all(H_s.sum(axis=1) > 0):
                    root = np.sqrt(dv.data)
                    identity = max(identity, float(np.max(np.abs(P @ root - root))))
        passed = asym <= 1e-5 and min_eig >= -1e-5 and max_eig <= 1 + 1e-4 and identity <= 1e-4
        return passed, (
            f"asym {asym:.1e}, eig [{min_eig:.2e}, {max_eig:.6f}], eigvec err {identity:.1e}"
        )

    def check_sparsify_monotone(self) -> Tuple[bool, str]:
        rng = self._rng(11)
        for _ in range(self.instances):
            H = np.abs(rng.standard_normal((16, 8)))
            counts = [int(np.count_nonzero(sparsify_mask(H, lam))) for lam in np.linspace(0.0, 1.0, 11)]
            if any(b > a for a, b in zip(counts, counts[1:])):
                return False, f"nonzero counts not monotone: {counts}"
        return True, f"{self.instances} matrices, 11 lambda values each"

    # ========================================
    # Metrics
    # ========================================

    def check_metrics(self) -> Tuple[bool, str]:
        rng = self._rng(12)
        pairs, naive = [], []
        for index in range(self.instances):
            height, width = int(rng.integers(4, 33)), int(rng.integers(4, 33))
            density = rng.uniform(0.02, 0.2)
            pred = (rng.random((height, width)) < density).astype(np.uint8)
            gt = (rng.random((height, width)) < density).astype(np.uint8)
            pairs.append((f"{index:04d}", pred, gt))
            naive.append(oracles.naive_image_metrics(pred, gt))

        report = evaluate(pairs)
        expected = oracles.naive_aggregate(naive)
        counts_ok = all(
            (r.tp, r.fp, r.fn, r.targets, r.detected, r.false_pixels)
            == (n.tp, n.fp, n.fn, n.targets, n.detected, n.false_pixels)
            for r, n in zip(report.images, naive)
        )
        worst = max(abs(getattr(report, key) - value) for key, value in expected.items())
        return counts_ok and worst <= 1e-9, f"counts {'exact' if counts_ok else 'differ'}, max ratio err {worst:.1e}"
