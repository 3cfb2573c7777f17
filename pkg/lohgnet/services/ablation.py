"""
Component ablations and the HORL hyperparameter sweep.

Each ablation variant switches one component of the network off, is trained
from the same seed on the same dataset with the toy harness, and is evaluated
on that dataset. The full network is always run first as the reference row.

The sweep trains one network per (sparsity factor, hyperedge count) pair in
the same way and reports the grid.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field

from lohgnet.config.network import NetworkConfig
from lohgnet.core.constants import FA_DISPLAY_SCALE
from lohgnet.core.errors import ContractError
from lohgnet.data.dataset import Sample, load_dataset
from lohgnet.models.network import LoHGNet
from lohgnet.schemas.report import DetectionReport
from lohgnet.services.metrics import evaluate, predict_mask
from lohgnet.services.trainer import Trainer

logger = logging.getLogger(__name__)

FULL = "full"

VARIANTS: Dict[str, Dict[str, bool]] = {
    FULL: {},
    "no-euclidean": {"euclidean_branch": False},
    "no-lorentz": {"lorentz_branch": False},
    "no-horl": {"horl": False},
    "no-hypergraph": {"horl_hypergraph": False},
    "no-residual": {"galrcm_residual": False},
    "no-attention": {"galrcm_attention": False},
}

DEFAULT_SPARSITY_GRID = (0.25, 0.5, 1.0)
DEFAULT_HYPEREDGE_GRID = (64, 128, 256)


class Scores(BaseModel):
    """Aggregate metrics of one trained network on the dataset."""

    final_loss: Optional[float] = None
    iou: float = Field(ge=0.0, le=1.0)
    niou: float = Field(ge=0.0, le=1.0)
    f_measure: float = Field(ge=0.0, le=1.0)
    pd: float = Field(ge=0.0, le=1.0)
    fa: float = Field(ge=0.0)

    @classmethod
    def from_report(cls, report: DetectionReport, final_loss: Optional[float]) -> "Scores":
        return cls(
            final_loss=final_loss,
            iou=report.iou,
            niou=report.niou,
            f_measure=report.f_measure,
            pd=report.pd,
            fa=report.fa,
        )

    def cells(self) -> str:
        return (
            f"{self.iou:7.4f} {self.niou:7.4f} {self.f_measure:7.4f} "
            f"{self.pd:7.4f} {self.fa * FA_DISPLAY_SCALE:10.2f}"
        )


METRIC_HEADER = f"{'IoU':>7s} {'nIoU':>7s} {'F':>7s} {'Pd':>7s} {'Fa(1e-6)':>10s}"


class _JsonReport(BaseModel):
    def write_json(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path


class AblationRow(Scores):
    variant: str


class AblationReport(_JsonReport):
    steps: int
    seed: int
    images: int
    rows: List[AblationRow]

    def table_lines(self) -> List[str]:
        lines = [f"{'variant':16s} {METRIC_HEADER}"]
        lines.extend(f"{row.variant:16s} {row.cells()}" for row in self.rows)
        return lines


class SweepCell(Scores):
    sparsity: float
    hyperedges: int


class SweepReport(_JsonReport):
    steps: int
    seed: int
    images: int
    cells: List[SweepCell]

    @property
    def best(self) -> SweepCell:
        """Cell with the highest IoU (first in grid order on ties)."""
        return max(self.cells, key=lambda cell: cell.iou)

    def table_lines(self) -> List[str]:
        lines = [f"{'lambda':>7s} {'M':>5s} {METRIC_HEADER}"]
        lines.extend(f"{c.sparsity:7.3f} {c.hyperedges:5d} {c.cells()}" for c in self.cells)
        best = self.best
        lines.append(f"best IoU at lambda {best.sparsity:g}, M {best.hyperedges}")
        return lines


def train_and_score(samples: Sequence[Sample], config: NetworkConfig, steps: int) -> Scores:
    """Train a fresh network from ``config.seed`` and score it on ``samples``."""
    model = LoHGNet(config)
    log = Trainer(model, config.learning_rate).fit(samples, steps)
    pairs = [(sample.name, predict_mask(model, sample.image), sample.mask) for sample in samples]
    return Scores.from_report(evaluate(pairs), log.final_loss)


def run_ablation(
    data_dir: Path,
    config: NetworkConfig,
    variants: Optional[Sequence[str]] = None,
    steps: Optional[int] = None,
) -> AblationReport:
    """
    Train and evaluate each variant.

    Args:
        data_dir: Dataset root used for both training and evaluation
        config: Base configuration (all components on)
        variants: Variant names (default: every variant); ``full`` is always included
        steps: Training steps per variant (default ``config.steps``)

    Raises:
        ContractError: Unknown variant name
    """
    names = list(VARIANTS) if variants is None else [FULL] + [v for v in variants if v != FULL]
    unknown = [name for name in names if name not in VARIANTS]
    if unknown:
        raise ContractError(f"unknown ablation variants {unknown}; choose from {sorted(VARIANTS)}")

    _, samples = load_dataset(data_dir)
    steps = config.steps if steps is None else steps
    rows = []
    for name in names:
        variant = config.with_overrides(steps=steps, **VARIANTS[name])
        scores = train_and_score(samples, variant, steps)
        rows.append(AblationRow(variant=name, **scores.model_dump()))
        logger.info("ablation %s: IoU %.4f", name, scores.iou)

    return AblationReport(steps=steps, seed=config.seed, images=len(samples), rows=rows)


def sweep_grid(
    sparsities: Optional[Sequence[float]] = None,
    hyperedges: Optional[Sequence[int]] = None,
) -> List[Tuple[float, int]]:
    """Grid points in row-major order (sparsity outer, hyperedge count inner)."""
    sparsities = list(DEFAULT_SPARSITY_GRID if sparsities is None else sparsities)
    hyperedges = list(DEFAULT_HYPEREDGE_GRID if hyperedges is None else hyperedges)
    if not sparsities or not hyperedges:
        raise ContractError("sweep needs at least one sparsity factor and one hyperedge count")
    return [(float(lam), int(m)) for lam in sparsities for m in hyperedges]


def run_sweep(
    data_dir: Path,
    config: NetworkConfig,
    sparsities: Optional[Sequence[float]] = None,
    hyperedges: Optional[Sequence[int]] = None,
    steps: Optional[int] = None,
) -> SweepReport:
    """
    Train and evaluate one network per (sparsity factor, hyperedge count) pair.

    Every cell starts from the same seed and sees the same data.

    Raises:
        ContractError: Empty grid axis
        ConfigError: A grid value the network configuration rejects
    """
    grid = sweep_grid(sparsities, hyperedges)
    if not config.horl or not config.horl_hypergraph:
        raise ContractError("the sweep needs HORL with its hypergraph enabled")
    cell_configs = [config.with_overrides(sparsity=lam, hyperedges=m) for lam, m in grid]

    _, samples = load_dataset(data_dir)
    steps = config.steps if steps is None else steps
    cells = []
    for (lam, m), cell_config in zip(grid, cell_configs):
        scores = train_and_score(samples, cell_config, steps)
        cells.append(SweepCell(sparsity=lam, hyperedges=m, **scores.model_dump()))
        logger.info("sweep lambda %g M %d: IoU %.4f", lam, m, scores.iou)

    return SweepReport(steps=steps, seed=config.seed, images=len(samples), cells=cells)
