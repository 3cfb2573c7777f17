"""
Shared pytest fixtures.

Fixtures:
- rng: seeded numpy Generator
- f64: run the test body with 64-bit tensors
- tiny_config: smallest network configuration (tiny preset, 32x32)
- dataset_dir: a generated three-scene 32x32 dataset
"""

import numpy as np
import pytest

from lohgnet.config import NetworkConfig
from lohgnet.core.constants import Precision
from lohgnet.data.dataset import write_dataset
from lohgnet.numerics import precision


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def f64():
    with precision(Precision.F64):
        yield


@pytest.fixture
def tiny_config() -> NetworkConfig:
    return NetworkConfig(preset="tiny", input_size=32, seed=3, precision="f32", steps=5)


@pytest.fixture
def dataset_dir(tmp_path):
    root = tmp_path / "data"
    write_dataset(root, count=3, size=32, seed=11)
    return root
