"""
Services.

Training, evaluation, ablation and the verification harnesses (selftest,
gradient-check suite, brute-force oracles) built on the model layer. The
command-line module is a thin layer over these.
"""

from lohgnet.services.metrics import evaluate, evaluate_directories, predict_mask
from lohgnet.services.trainer import Trainer, fit_dataset, train_overfit

__all__ = [
    "Trainer",
    "evaluate",
    "evaluate_directories",
    "fit_dataset",
    "predict_mask",
    "train_overfit",
]
