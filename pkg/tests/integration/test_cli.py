"""End-to-end runs of the command-line interface."""

import json

import numpy as np
import pytest

from lohgnet import __version__, cli
from lohgnet.cli import main
from lohgnet.config import NetworkConfig
from lohgnet.data.pgm import read_pgm, read_pgm_raw
from lohgnet.data.synth import SceneSpec
from lohgnet.models.network import CHECKPOINT_KIND, LoHGNet
from lohgnet.numerics.weights import save_weights

NETWORK_FLAGS = ["--preset", "tiny", "--seed", "3", "--precision", "f32"]


@pytest.fixture
def workspace(tmp_path):
    """Generated dataset plus an untrained tiny checkpoint."""
    data, ckpt = tmp_path / "data", tmp_path / "run" / "net.lohgw"
    assert main(["gen", "--out", str(data), "--count", "2", "--size", "32", "--seed", "5"]) == 0
    assert main(["train", "--data", str(data), "--out", str(ckpt), "--steps", "0", *NETWORK_FLAGS]) == 0
    return tmp_path, data, ckpt


class TestPipeline:
    def test_gen_layout(self, workspace):
        _, data, _ = workspace
        manifest = json.loads((data / "manifest.json").read_text())
        assert manifest["count"] == 2
        assert sorted(p.name for p in (data / "images").iterdir()) == ["0000.pgm", "0001.pgm"]

    def test_train_writes_checkpoint_and_loss_log(self, workspace, capsys):
        root, data, _ = workspace
        ckpt = root / "trained.lohgw"
        assert main(["train", "--data", str(data), "--out", str(ckpt), "--steps", "2", *NETWORK_FLAGS]) == 0
        assert "trained 2 steps" in capsys.readouterr().out
        assert LoHGNet.load(ckpt).config.steps == 2
        assert len((root / "trained.lohgw.loss.csv").read_text().splitlines()) == 3

    def test_infer_directory_then_eval(self, workspace, capsys):
        root, data, ckpt = workspace
        pred = root / "pred"
        assert main(["infer", "--ckpt", str(ckpt), "--image", str(data), "--out", str(pred)]) == 0
        assert sorted(p.name for p in pred.iterdir()) == [
            "0000.pgm", "0000.prob.pgm", "0001.pgm", "0001.prob.pgm"
        ]
        assert read_pgm_raw(pred / "0000.prob.pgm")[1] == 65535
        mask = read_pgm(pred / "0000.pgm")
        assert set(np.unique(mask)) <= {0.0, 1.0}

        report = root / "report.json"
        assert main(["eval", "--pred", str(pred), "--gt", str(data), "--report", str(report)]) == 0
        assert [image["image"] for image in json.loads(report.read_text())["images"]] == ["0000", "0001"]

    def test_infer_single_image(self, workspace):
        root, data, ckpt = workspace
        out = root / "single" / "mask.pgm"
        assert main(["infer", "--ckpt", str(ckpt), "--image", str(data / "images" / "0001.pgm"), "--out", str(out)]) == 0
        assert out.exists()
        probabilities = read_pgm(root / "single" / "mask.prob.pgm")
        expected = LoHGNet.load(ckpt).predict(read_pgm(data / "images" / "0001.pgm"))[0, 0]
        assert np.allclose(probabilities, expected, atol=0.5 / 65535 + 1e-6)

    def test_eval_ground_truth_against_itself(self, workspace, capsys):
        root, data, _ = workspace
        report, table = root / "self.json", root / "self.csv"
        code = main(["eval", "--pred", str(data), "--gt", str(data), "--report", str(report), "--csv", str(table)])
        assert code == 0
        out = capsys.readouterr().out
        assert "IoU    1.0000" in out
        assert "Pd     1.0000" in out
        assert "Fa     0.00 x 1e-6" in out
        assert json.loads(report.read_text())["iou"] == 1.0
        assert len(table.read_text().splitlines()) == 3

    def test_dump_hypergraph(self, workspace, capsys):
        root, data, ckpt = workspace
        out = root / "dump"
        code = main(["dump-hypergraph", "--ckpt", str(ckpt), "--image", str(data / "images" / "0000.pgm"), "--out", str(out)])
        assert code == 0
        assert sorted(p.name for p in out.iterdir()) == ["De.csv", "Dv.csv", "H.csv", "H_s.csv", "P_H.csv"]
        assert np.loadtxt(out / "P_H.csv", delimiter=",").shape == (4, 4)

    def test_ablate(self, workspace, capsys):
        root, data, _ = workspace
        report = root / "ablation.json"
        code = main([
            "ablate", "--data", str(data), "--steps", "1", "--variants", "no-hypergraph",
            "--report", str(report), *NETWORK_FLAGS,
        ])
        assert code == 0
        assert [row["variant"] for row in json.loads(report.read_text())["rows"]] == ["full", "no-hypergraph"]
        assert capsys.readouterr().out.splitlines()[0].startswith("variant")


    def test_sweep(self, workspace, capsys):
        root, data, _ = workspace
        report = root / "sweep.json"
        code = main([
            "sweep", "--data", str(data), "--steps", "1", "--sparsity-grid", "0.25", "0.5",
            "--hyperedge-grid", "4", "--report", str(report), *NETWORK_FLAGS,
        ])
        assert code == 0
        cells = json.loads(report.read_text())["cells"]
        assert [(c["sparsity"], c["hyperedges"]) for c in cells] == [(0.25, 4), (0.5, 4)]
        out = capsys.readouterr().out.splitlines()
        assert out[0].split()[:2] == ["lambda", "M"]
        assert out[-1].startswith("best IoU at lambda")

    def test_sweep_rejects_negative_sparsity(self, workspace):
        _, data, _ = workspace
        assert main(["sweep", "--data", str(data), "--steps", "0", "--sparsity-grid", "-1"]) == 2


class TestChecks:
    def test_selftest_passes(self, capsys):
        assert main(["selftest", "--instances", "1"]) == 0
        assert capsys.readouterr().out.splitlines()[-1].endswith("0 failed")

    def test_selftest_fault_is_reported(self, capsys):
        assert main(["selftest", "--instances", "1", "--inject-fault"]) == 1
        assert "FAIL  manifold membership" in capsys.readouterr().out

    def test_gradcheck_horl(self, capsys):
        assert main(["gradcheck", "--module", "horl", "--samples", "2"]) == 0
        assert "max relative error (floored" in capsys.readouterr().out.splitlines()[-1]

    def test_config_shows_resolved_values(self, tmp_path, capsys):
        path = tmp_path / "tiny.json"
        path.write_text(json.dumps({"preset": "tiny", "sparsity": 0.25}))
        assert main(["config", "--config", str(path), "--seed", "9"]) == 0
        out = capsys.readouterr().out
        assert '"sparsity": 0.25' in out
        assert '"seed": 9' in out
        assert "hyperedges 64" in out


class TestExitCodes:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["fly"])
        assert excinfo.value.code == 2

    def test_missing_checkpoint(self, tmp_path, capsys):
        code = main(["infer", "--ckpt", str(tmp_path / "none.lohgw"), "--image", str(tmp_path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "lohgnet infer:" in capsys.readouterr().err

    def test_bad_size(self, tmp_path):
        assert main(["gen", "--out", str(tmp_path / "d"), "--count", "1", "--size", "40"]) == 2

    @pytest.mark.parametrize("flags", [["--count", "-1"], ["--count", "1", "--seed", "-1"]])
    def test_bad_count_or_seed(self, tmp_path, capsys, flags):
        assert main(["gen", "--out", str(tmp_path / "d"), "--size", "32", *flags]) == 2
        assert "lohgnet gen:" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["gen", "--out", str(blocker / "d"), "--count", "1", "--size", "32"]) == 2
        assert "lohgnet gen:" in capsys.readouterr().err

    def test_validation_error_maps_to_usage(self, tmp_path, monkeypatch, capsys):
        def invalid_scene(*args, **kwargs):
            return SceneSpec(width=0)

        monkeypatch.setattr(cli, "write_dataset", invalid_scene)
        assert main(["gen", "--out", str(tmp_path / "d"), "--count", "1", "--size", "32"]) == 2
        assert "invalid value" in capsys.readouterr().err

    def test_invalid_config_flag(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"curvature": -2}))
        assert main(["config", "--config", str(path)]) == 2

    def test_non_finite_checkpoint(self, tmp_path, capsys):
        config = NetworkConfig(preset="tiny", input_size=32, seed=0, precision="f32")
        arrays = LoHGNet(config).state_dict()
        arrays["decoder.head.bias"] = np.array([np.nan], dtype=np.float32)
        ckpt = tmp_path / "nan.lohgw"
        save_weights(ckpt, arrays, {"kind": CHECKPOINT_KIND, "config": config.model_dump(mode="json")})
        assert main(["gen", "--out", str(tmp_path / "d"), "--count", "1", "--size", "32"]) == 0
        image = tmp_path / "d" / "images" / "0000.pgm"
        code = main(["infer", "--ckpt", str(ckpt), "--image", str(image), "--out", str(tmp_path / "o.pgm")])
        assert code == 3
        assert "non-finite" in capsys.readouterr().err
