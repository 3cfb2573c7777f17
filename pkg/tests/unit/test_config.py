"""Tests for runtime settings and the network configuration model."""

import argparse
import json

import pytest
from pydantic import ValidationError

from lohgnet.cli import _network_config
from lohgnet.config import NetworkConfig, settings
from lohgnet.config.settings import Settings
from lohgnet.core.constants import ChannelPreset, Precision
from lohgnet.core.errors import ConfigError, InputError


def _args(**flags) -> argparse.Namespace:
    defaults = {"config": None, "seed": None, "precision": None, "preset": None, "steps": None, "lr": None}
    defaults.update(flags)
    return argparse.Namespace(**defaults)


class TestSettings:
    def test_environment_prefix(self, monkeypatch):
        monkeypatch.setenv("LOHG_PRECISION", "f64")
        monkeypatch.setenv("LOHG_DEFAULT_SEED", "17")
        loaded = Settings()
        assert loaded.precision == Precision.F64
        assert loaded.default_seed == 17

    def test_block_step_bounded_by_primitive_step(self, monkeypatch):
        monkeypatch.setenv("LOHG_GRADCHECK_STEP", "1e-6")
        monkeypatch.setenv("LOHG_GRADCHECK_BLOCK_STEP", "1e-4")
        with pytest.raises(ValidationError):
            Settings()

    def test_rejects_unknown_log_level(self, monkeypatch):
        monkeypatch.setenv("LOHG_LOG_LEVEL", "LOUD")
        with pytest.raises(ValidationError):
            Settings()


class TestNetworkConfig:
    def test_defaults(self):
        config = NetworkConfig()
        assert config.curvature == 1.0
        assert config.sparsity == 0.5
        assert config.degree_eps == 1e-6
        assert config.preset == ChannelPreset.FULL
        assert config.widths == (16, 32, 64, 128, 256)
        assert config.resolved_input_size == 256
        assert config.resolved_hyperedges == 256
        assert config.vertex_width == 128

    def test_tiny_preset_derivations(self):
        config = NetworkConfig(preset="tiny")
        assert config.resolved_input_size == 64
        assert config.deepest_vertices == 16
        assert config.resolved_hyperedges == 64
        assert config.vertex_width == 64

    def test_explicit_hyperedges_win(self):
        assert NetworkConfig(preset="tiny", hyperedges=5).resolved_hyperedges == 5

    def test_environment_defaults(self, monkeypatch):
        monkeypatch.setattr(settings, "default_seed", 42)
        monkeypatch.setattr(settings, "precision", Precision.F64)
        config = NetworkConfig()
        assert config.seed == 42
        assert config.precision == Precision.F64

    @pytest.mark.parametrize("data", [
        {"curvature": 0.0},
        {"input_size": 40},
        {"sparsity": -0.5},
        {"degree_eps": 0.0},
        {"threshold": 1.0},
        {"unknown": 1},
        {"lorentz_branch": False, "euclidean_branch": False},
    ])
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            NetworkConfig.build(data)

    def test_overrides_skip_none(self):
        config = NetworkConfig(seed=3).with_overrides(seed=None, steps=7)
        assert (config.seed, config.steps) == (3, 7)

    def test_json_round_trip(self):
        config = NetworkConfig(preset="tiny", input_size=32, horl=False)
        assert NetworkConfig.build(json.loads(config.to_json())) == config


class TestPrecedence:
    def test_file_over_defaults_and_flags_over_file(self, tmp_path):
        path = tmp_path / "net.json"
        path.write_text(json.dumps({"seed": 5, "precision": "f32", "preset": "tiny", "learning_rate": 0.1}))
        config = _network_config(_args(config=path, precision="f64", lr=0.5))
        assert config.seed == 5
        assert config.preset == ChannelPreset.TINY
        assert config.precision == Precision.F64
        assert config.learning_rate == 0.5

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            _network_config(_args(config=tmp_path / "absent.json"))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "net.json"
        path.write_text("{seed: 1")
        with pytest.raises(ConfigError):
            _network_config(_args(config=path))

    def test_hyperparameter_flags(self, tmp_path):
        path = tmp_path / "net.json"
        path.write_text(json.dumps({"sparsity": 0.25, "hyperedges": 32}))
        config = _network_config(_args(config=path, sparsity=0.75))
        assert (config.sparsity, config.resolved_hyperedges) == (0.75, 32)

    def test_invalid_flag_value(self):
        with pytest.raises(ConfigError):
            _network_config(_args(lr=-1.0))
