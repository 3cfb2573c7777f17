"""
Finite-difference gradient sweeps per module group.

All checks run in 64-bit. Tolerances:

    primitive ops and geometry maps    1e-6
    blocks (encoders, HORL)            1e-5
    end-to-end tiny network            1e-4

Vector-valued graphs are reduced to a scalar by a fixed random projection
``sum(out * R)``. Module checks differentiate with respect to every
parameter tensor (sampled entries) and the block input.

Usage:
    result = GradcheckSuite(seed=0).run(GradcheckTarget.HORL)
    print("\\n".join(result.lines()))
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np

from lohgnet.config import settings
from lohgnet.config.network import NetworkConfig
from lohgnet.core.constants import ChannelPreset, GradcheckTarget, Precision
from lohgnet.data.synth import SceneSpec, generate
from lohgnet.geometry.maps import from_spatial, log_map_spatial, time_channel
from lohgnet.models.base import Module
from lohgnet.models.euclidean_branch import EuclideanEncoder
from lohgnet.models.fusion_decoder import soft_iou_loss
from lohgnet.models.horl import HORL
from lohgnet.models.layers import ConvUnit
from lohgnet.models.lorentz_encoder import (
    GALRCM,
    galrcm_fuse,
    geometric_attention,
    lib_lift,
    lorentz_conv,
    lorentz_norm,
    manifold_activation,
)
from lohgnet.models.network import LoHGNet
from lohgnet.numerics import ops
from lohgnet.numerics.gradcheck import GradcheckReport, gradcheck
from lohgnet.numerics.tensor import Tensor, no_grad, precision

logger = logging.getLogger(__name__)

PRIMITIVE_TOL = 1e-6
BLOCK_TOL = 1e-5
E2E_TOL = 1e-4

E2E_SIZE = 16
# Parameters at init sit exactly on activation kinks (zero biases over 1x1 maps).
JITTER = 1e-2

ELEMENTWISE_SHAPES = [(3,), (2, 3), (1, 2, 3, 3)]


@dataclass
class SuiteResult:
    reports: List[GradcheckReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports)

    @property
    def max_rel_error(self) -> float:
        return max((report.max_rel_error for report in self.reports), default=0.0)

    def lines(self) -> List[str]:
        lines = [report.summary() for report in self.reports]
        failed = sum(not report.passed for report in self.reports)
        lines.append(
            f"{len(self.reports)} checks, {failed} failed, "
            f"max rel err (floored) {self.max_rel_error:.3e}"
        )
        return lines


class GradcheckSuite:
    """
    Builds small random instances and checks every differentiable piece.

    Args:
        seed: Seed for inputs, projections and sampled entries
        samples: Entries compared per parameter tensor in module checks
    """

    def __init__(self, seed: int = 0, samples: int = None):
        self.seed = seed
        self.samples = samples or settings.gradcheck_samples
        self.rng = np.random.default_rng(seed)
        self.result = SuiteResult()

    # ========================================
    # Running
    # ========================================

    def run(self, target: GradcheckTarget = GradcheckTarget.ALL) -> SuiteResult:
        target = GradcheckTarget(target)
        groups: Dict[GradcheckTarget, Callable[[], None]] = {
            GradcheckTarget.NUMERICS: self.check_numerics,
            GradcheckTarget.LORENTZ: self.check_lorentz,
            GradcheckTarget.EUCLID: self.check_euclid,
            GradcheckTarget.HORL: self.check_horl,
            GradcheckTarget.E2E: self.check_e2e,
        }
        selected = list(groups) if target == GradcheckTarget.ALL else [target]
        with precision(Precision.F64):
            for group in selected:
                logger.info("gradcheck group %s", group.value)
                groups[group]()
        return self.result

    # ========================================
    # Helpers
    # ========================================

    def _tensor(self, values: np.ndarray) -> Tensor:
        return Tensor(values, dtype=np.float64)

    def _normal(self, *shape: int) -> Tensor:
        return self._tensor(self.rng.standard_normal(shape))

    def _uniform(self, shape: Sequence[int], low: float, high: float) -> Tensor:
        return self._tensor(self.rng.uniform(low, high, shape))

    def _away_from_zero(self, shape: Sequence[int]) -> Tensor:
        magnitude = self.rng.uniform(0.2, 1.0, shape)
        return self._tensor(magnitude * self.rng.choice([-1.0, 1.0], size=shape))

    def _projected(self, fn: Callable[..., Tensor], inputs: Sequence[Tensor]) -> Callable[..., Tensor]:
        with no_grad():
            shape = fn(*inputs).shape
        weights = self._tensor(self.rng.standard_normal(shape) / math.sqrt(math.prod(shape)))
        return lambda *xs: ops.sum(ops.mul(fn(*xs), weights))

    def _check(
        self,
        name: str,
        fn: Callable[..., Tensor],
        inputs: Sequence[Tensor],
        rel_tol: float,
        step: float = None,
        max_entries: int = None,
        scalar: bool = False,
    ) -> GradcheckReport:
        graph = fn if scalar else self._projected(fn, inputs)
        report = gradcheck(
            graph,
            list(inputs),
            rel_tol=rel_tol,
            step=step or settings.gradcheck_step,
            max_entries=max_entries,
            seed=self.seed,
            name=name,
        )
        self.result.reports.append(report)
        return report

    def _jitter(self, module: Module) -> None:
        module.bind_parameters({
            name: Tensor(p.data + JITTER * self.rng.standard_normal(p.shape), requires_grad=True, dtype=p.dtype)
            for name, p in module.named_parameters()
        })

    def _check_module(
        self,
        name: str,
        module: Module,
        fn: Callable[..., Tensor],
        inputs: Sequence[Tensor],
        rel_tol: float,
        scalar: bool = False,
    ) -> GradcheckReport:
        """Check ``fn(*inputs)`` with respect to the inputs and all parameters of ``module``."""
        self._jitter(module)
        names = [n for n, _ in module.named_parameters()]
        originals = [p for _, p in module.named_parameters()]
        count = len(inputs)

        def graph(*tensors: Tensor) -> Tensor:
            module.bind_parameters(dict(zip(names, tensors[count:])))
            return fn(*tensors[:count])

        try:
            return self._check(
                name,
                graph,
                list(inputs) + originals,
                rel_tol,
                step=settings.gradcheck_block_step,
                max_entries=self.samples,
                scalar=scalar,
            )
        finally:
            module.bind_parameters(dict(zip(names, originals)))

    # ========================================
    # Groups
    # ========================================

    def check_numerics(self) -> None:
        """Every primitive op on several shapes."""
        for shape in ELEMENTWISE_SHAPES:
            label = "x".join(map(str, shape))
            self._check(f"add {label}", ops.add, [self._normal(*shape), self._normal(*shape)], PRIMITIVE_TOL)
            self._check(f"sub {label}", ops.sub, [self._normal(*shape), self._normal(*shape)], PRIMITIVE_TOL)
            self._check(f"mul {label}", ops.mul, [self._normal(*shape), self._normal(*shape)], PRIMITIVE_TOL)
            self._check(
                f"div {label}", ops.div,
                [self._normal(*shape), self._uniform(shape, 2.0, 3.0)], PRIMITIVE_TOL,
            )
            self._check(f"scale {label}", lambda x: ops.scale(x, 1.7), [self._normal(*shape)], PRIMITIVE_TOL)
            self._check(f"relu {label}", ops.relu, [self._away_from_zero(shape)], PRIMITIVE_TOL)
            self._check(f"leaky_relu {label}", ops.leaky_relu, [self._away_from_zero(shape)], PRIMITIVE_TOL)
            self._check(f"sigmoid {label}", ops.sigmoid, [self._normal(*shape)], PRIMITIVE_TOL)
            self._check(f"sqrt {label}", ops.sqrt, [self._uniform(shape, 1.0, 2.0)], PRIMITIVE_TOL)
            self._check(f"square {label}", ops.square, [self._normal(*shape)], PRIMITIVE_TOL)
            self._check(f"absolute {label}", ops.absolute, [self._away_from_zero(shape)], PRIMITIVE_TOL)
            self._check(
                f"clamp_min {label}", lambda x: ops.clamp_min(x, 0.0),
                [self._away_from_zero(shape)], PRIMITIVE_TOL,
            )
            self._check(f"sum {label}", lambda x: ops.sum(x, axis=0), [self._normal(*shape)], PRIMITIVE_TOL)
            self._check(f"mean {label}", lambda x: ops.mean(x), [self._normal(*shape)], PRIMITIVE_TOL)

        self._check(
            "add per-channel broadcast",
            ops.add, [self._normal(1, 2, 3, 3), self._normal(1, 2, 1, 1)], PRIMITIVE_TOL,
        )
        self._check(
            "mul per-channel broadcast",
            ops.mul, [self._normal(1, 2, 3, 3), self._normal(1, 2, 1, 1)], PRIMITIVE_TOL,
        )
        self._check("reshape", lambda x: ops.reshape(x, (3, 4)), [self._normal(2, 6)], PRIMITIVE_TOL)
        self._check("transpose", ops.transpose, [self._normal(3, 5)], PRIMITIVE_TOL)
        self._check("narrow", lambda x: ops.narrow(x, 1, 1, 2), [self._normal(1, 4, 2, 2)], PRIMITIVE_TOL)
        self._check(
            "concat",
            lambda a, b: ops.concat([a, b], axis=1),
            [self._normal(1, 2, 3, 3), self._normal(1, 3, 3, 3)],
            PRIMITIVE_TOL,
        )
        self._check("matmul", ops.matmul, [self._normal(3, 4), self._normal(4, 2)], PRIMITIVE_TOL)
        for stride, padding, kernel in ((1, 1, 3), (2, 1, 3), (1, 0, 1)):
            self._check(
                f"conv2d k{kernel} s{stride} p{padding}",
                lambda x, w, b, s=stride, p=padding: ops.conv2d(x, w, b, s, p),
                [self._normal(2, 2, 5, 5), self._normal(3, 2, kernel, kernel), self._normal(3)],
                PRIMITIVE_TOL,
            )
        self._check("gap", ops.gap, [self._normal(2, 3, 4, 5)], PRIMITIVE_TOL)
        self._check("upsample2x", ops.upsample2x, [self._normal(1, 2, 3, 4)], PRIMITIVE_TOL)
        self._check("instance_norm", ops.instance_norm, [self._normal(2, 2, 4, 4)], PRIMITIVE_TOL)
        self._check(
            "conv2d -> relu -> gap",
            lambda x, w: ops.gap(ops.relu(ops.conv2d(x, w, None, 1, 1))),
            [self._normal(1, 2, 5, 5), self._normal(3, 2, 3, 3)],
            PRIMITIVE_TOL,
        )

    def check_lorentz(self) -> None:
        """Geometry maps at primitive tolerance, encoder pieces at block tolerance."""
        k = 1.0
        self._check("reconstruct_time", lambda s: time_channel(s, k), [self._normal(1, 3, 2, 2)], PRIMITIVE_TOL)
        self._check(
            "log_map_origin (space)",
            lambda s: log_map_spatial(from_spatial(s, k)),
            [self._normal(1, 3, 2, 2)],
            PRIMITIVE_TOL,
        )
        self._check(
            "log_map_origin k=2.5",
            lambda s: log_map_spatial(from_spatial(s, 2.5)),
            [self._normal(1, 3, 2, 2)],
            PRIMITIVE_TOL,
        )

        block_step = settings.gradcheck_block_step
        self._check(
            "lib_lift",
            lambda x, w, b: lib_lift(x, w, b, k).data,
            [self._normal(1, 1, 4, 4), self._normal(3, 1, 3, 3), self._normal(3)],
            BLOCK_TOL, step=block_step,
        )
        self._check(
            "lorentz_conv stride 2",
            lambda s, w, b: lorentz_conv(from_spatial(s, k), w, b, stride=2).data,
            [self._normal(1, 3, 4, 4), self._normal(2, 4, 3, 3), self._normal(2)],
            BLOCK_TOL, step=block_step,
        )
        self._check(
            "lorentz_norm",
            lambda s, gamma, beta: lorentz_norm(from_spatial(s, k), gamma, beta).data,
            [self._normal(1, 3, 4, 4), self._uniform((3,), 0.5, 1.5), self._normal(3)],
            BLOCK_TOL, step=block_step,
        )
        self._check(
            "manifold_activation",
            lambda s: manifold_activation(from_spatial(s, k)).data,
            [self._away_from_zero((1, 3, 3, 3))],
            BLOCK_TOL, step=block_step,
        )
        self._check(
            "geometric_attention",
            lambda s, w1, b1, w2, b2: geometric_attention(from_spatial(s, k), w1, b1, w2, b2),
            [
                self._normal(1, 4, 3, 3),
                self._normal(2, 5, 1, 1),
                self._uniform((2,), 0.5, 1.0),
                self._normal(4, 2, 1, 1),
                self._normal(4),
            ],
            BLOCK_TOL, step=block_step,
        )
        self._check(
            "galrcm_fuse",
            lambda alpha, main, proj: galrcm_fuse(alpha, main, proj, k).data,
            [self._uniform((1, 3, 1, 1), 0.1, 0.9), self._normal(1, 3, 2, 2), self._normal(1, 3, 2, 2)],
            BLOCK_TOL, step=block_step,
        )

        block = GALRCM(3, 4, k, self.rng, reduction=2)
        self._check_module(
            "GALRCM block",
            block,
            lambda s: block(from_spatial(s, k)).data,
            [self._normal(1, 3, 4, 4)],
            BLOCK_TOL,
        )

    def check_euclid(self) -> None:
        unit = ConvUnit(2, 3, self.rng)
        self._check_module("ConvUnit", unit, unit, [self._normal(1, 2, 4, 4)], BLOCK_TOL)

        encoder = EuclideanEncoder((2, 2, 3, 3, 4), self.rng)
        self._check_module(
            "EuclideanEncoder (deepest scale)",
            encoder,
            lambda x: encoder(x)[-1],
            [self._normal(1, 1, 16, 16)],
            BLOCK_TOL,
        )

    def check_horl(self) -> None:
        horl = HORL(4, 2, 4, self.rng)
        self._check_module("HORL propagate", horl, horl, [self._normal(1, 4, 3, 3)], BLOCK_TOL)

        plain = HORL(4, 2, 4, self.rng, hypergraph=False)
        self._check_module("HORL without hypergraph", plain, plain, [self._normal(1, 4, 3, 3)], BLOCK_TOL)

    def check_e2e(self) -> None:
        """Soft-IoU loss of the tiny network on a 16x16 scene."""
        config = NetworkConfig(
            preset=ChannelPreset.TINY,
            input_size=E2E_SIZE,
            precision=Precision.F64,
            seed=self.seed,
        )
        model = LoHGNet(config)
        scene = generate(SceneSpec(width=E2E_SIZE, height=E2E_SIZE, num_targets=1, seed=self.seed))
        image = model.as_input(scene.image)
        mask = Tensor(scene.mask[np.newaxis], dtype=np.float64)
        self._check_module(
            "end-to-end (tiny, 16x16)",
            model,
            lambda x: soft_iou_loss(model(x), mask),
            [image],
            E2E_TOL,
            scalar=True,
        )
