"""
Toy training harness.

Plain SGD on the soft-IoU loss, one image per step, samples visited in
dataset order. There is no optimizer state, so a run is fully determined by
the network config (initial weights) and the data.

Usage:
    model = LoHGNet(config)
    trainer = Trainer(model, lr=1e-2)
    log = trainer.fit(samples, steps=500)
    log.write_csv(Path("run.loss.csv"))
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from lohgnet.config.network import NetworkConfig
from lohgnet.core.errors import ContractError, NumericError
from lohgnet.data.dataset import Sample, load_dataset
from lohgnet.data.synth import Scene
from lohgnet.models.fusion_decoder import soft_iou_loss
from lohgnet.models.network import LoHGNet
from lohgnet.numerics.tensor import Tensor, backward, precision

logger = logging.getLogger(__name__)

LOSS_LOG_SUFFIX = ".loss.csv"
LOG_EVERY = 50


@dataclass
class TrainingLog:
    """Loss before each update, indexed by step."""

    losses: List[float] = field(default_factory=list)

    @property
    def final_loss(self) -> Optional[float]:
        return self.losses[-1] if self.losses else None

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["step", "loss"])
            for step, loss in enumerate(self.losses):
                writer.writerow([step, repr(loss)])
        return path


def _mask_tensor(mask: np.ndarray, dtype) -> Tensor:
    array = np.asarray(mask)
    while array.ndim < 4:
        array = array[np.newaxis]
    return Tensor(array, dtype=dtype)


class Trainer:
    """
    SGD loop over one network.

    Args:
        model: Network to update in place
        lr: Step size (``lr == 0`` leaves the parameters bit-identical)
    """

    def __init__(self, model: LoHGNet, lr: float):
        if lr < 0 or not math.isfinite(lr):
            raise ContractError(f"learning rate must be finite and >= 0, got {lr}")
        self.model = model
        self.lr = lr

    def step(self, image: np.ndarray, mask: np.ndarray) -> float:
        """
        Forward, backward and one update; returns the loss before the update.

        Raises:
            NumericError: The loss or any gradient is non-finite
        """
        model = self.model
        with precision(model.config.precision):
            model.zero_grad()
            x = model.as_input(image)
            gt = _mask_tensor(mask, model.dtype)
            loss = soft_iou_loss(model(x), gt)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError("soft_iou_loss", "training loss is non-finite")
            backward(loss)
            model.sgd_step(self.lr)
        return value

    def fit(self, samples: Sequence[Sample], steps: int) -> TrainingLog:
        """Run ``steps`` updates cycling through ``samples`` in order."""
        if steps > 0 and not samples:
            raise ContractError("training needs at least one sample")
        log = TrainingLog()
        for step in range(steps):
            sample = samples[step % len(samples)]
            log.losses.append(self.step(sample.image, sample.mask))
            if step % LOG_EVERY == 0 or step == steps - 1:
                logger.info("step %d/%d loss %.6f", step + 1, steps, log.losses[-1])
        return log


# ========================================
# Operations
# ========================================

def train_step(model: LoHGNet, image: np.ndarray, mask: np.ndarray, lr: float) -> float:
    return Trainer(model, lr).step(image, mask)


def train_overfit(model: LoHGNet, scene: Scene, steps: int, lr: Optional[float] = None) -> float:
    """
    Fit a single scene; returns the loss of the last step.

    ``lr`` defaults to the model config's learning rate.
    """
    if steps < 1:
        raise ContractError(f"need at least one step, got {steps}")
    trainer = Trainer(model, model.config.learning_rate if lr is None else lr)
    log = trainer.fit([Sample(name="scene", image=scene.image, mask=scene.mask)], steps)
    return log.final_loss


def loss_log_path(checkpoint: Path) -> Path:
    checkpoint = Path(checkpoint)
    return checkpoint.with_name(checkpoint.name + LOSS_LOG_SUFFIX)


def fit_dataset(
    data_dir: Path,
    config: NetworkConfig,
    checkpoint: Path,
    loss_log: Optional[Path] = None,
) -> TrainingLog:
    """
    Train a fresh network on a generated dataset and write its checkpoint.

    Args:
        data_dir: Dataset root (manifest, images, masks)
        config: Network and training hyperparameters
        checkpoint: Output checkpoint path
        loss_log: Loss CSV path (default ``<checkpoint>.loss.csv``)

    Raises:
        InputError: Dataset missing
        FormatError: Dataset corrupt
        NumericError: Training diverged
    """
    _, samples = load_dataset(data_dir)
    model = LoHGNet(config)
    log = Trainer(model, config.learning_rate).fit(samples, config.steps)

    model.save(checkpoint)
    log.write_csv(loss_log or loss_log_path(checkpoint))
    logger.info("trained %d steps on %d samples", config.steps, len(samples))
    return log
