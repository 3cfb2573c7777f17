"""Tests for PGM I/O, synthetic scenes and generated datasets."""

import numpy as np
import pytest
from pydantic import ValidationError

from lohgnet.core.errors import DimensionError, FormatError, GenerationError, InputError
from lohgnet.data.dataset import (
    MANIFEST_NAME,
    load_dataset,
    load_mask,
    load_mask_dir,
    read_manifest,
    scene_seeds,
    write_dataset,
)
from lohgnet.data.pgm import decode_pgm, encode_pgm, read_pgm, read_pgm_raw, write_pgm
from lohgnet.data.synth import SceneSpec, generate
from lohgnet.services.metrics import components


class TestPgm:
    def test_eight_bit_round_trip(self, tmp_path, rng):
        raster = rng.integers(0, 256, (5, 7), dtype=np.uint8)
        write_pgm(tmp_path / "a.pgm", raster)
        back, maxval = read_pgm_raw(tmp_path / "a.pgm")
        assert maxval == 255
        assert np.array_equal(back, raster)

    def test_sixteen_bit_quantization(self, tmp_path, rng):
        image = rng.random((4, 6))
        write_pgm(tmp_path / "a.pgm", image, bits=16)
        assert np.allclose(read_pgm(tmp_path / "a.pgm"), image, atol=0.5 / 65535 + 1e-12)

    def test_sixteen_bit_is_big_endian(self):
        raster, maxval = decode_pgm(b"P5 1 1 65535\n\x01\x00")
        assert maxval == 65535
        assert raster[0, 0] == 256

    def test_full_scale_reads_as_one(self, tmp_path):
        write_pgm(tmp_path / "a.pgm", np.full((2, 2), 65535, dtype=np.uint16), bits=16)
        assert np.array_equal(read_pgm(tmp_path / "a.pgm"), np.ones((2, 2)))

    def test_header_comments(self):
        raster, _ = decode_pgm(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
        assert raster.tolist() == [[0, 255]]

    def test_ascii_pgm_rejected(self):
        with pytest.raises(FormatError) as excinfo:
            decode_pgm(b"P2\n1 1\n255\n0\n")
        assert excinfo.value.offset == 0

    def test_truncated_raster(self):
        with pytest.raises(FormatError):
            decode_pgm(b"P5 2 2 255\n\x00\x00\x00")

    def test_sample_above_maxval(self):
        with pytest.raises(FormatError):
            decode_pgm(b"P5 1 1 10\n\x14")

    def test_encode_rejects_out_of_range(self):
        with pytest.raises(FormatError):
            encode_pgm(np.array([[300]]), 255)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            read_pgm(tmp_path / "absent.pgm")

    def test_error_names_the_file(self, tmp_path):
        (tmp_path / "bad.pgm").write_bytes(b"P6 1 1 255\n\x00")
        with pytest.raises(FormatError, match="bad.pgm"):
            read_pgm(tmp_path / "bad.pgm")


class TestSynth:
    def test_same_seed_same_scene(self):
        first, second = generate(SceneSpec(seed=5)), generate(SceneSpec(seed=5))
        assert np.array_equal(first.image, second.image)
        assert np.array_equal(first.mask, second.mask)
        assert not np.array_equal(first.image, generate(SceneSpec(seed=6)).image)

    def test_shapes_and_ranges(self):
        scene = generate(SceneSpec(width=48, height=32, seed=1))
        assert scene.image.shape == (1, 32, 48)
        assert scene.mask.shape == (1, 32, 48)
        assert scene.mask.dtype == np.uint8
        assert scene.image.min() >= 0.0 and scene.image.max() <= 1.0
        assert len(scene.targets) == 2

    def test_fixed_centres_are_mask_centroids(self):
        scene = generate(SceneSpec(centers=[(20, 20), (40, 44)], seed=3))
        centroids = sorted(tuple(c) for c, _ in components(scene.mask[0]))
        assert np.allclose(centroids, [(20, 20), (40, 44)], atol=1e-9)
        assert scene.target_centroids == [(20.0, 20.0), (40.0, 44.0)]

    def test_unit_sigma_mask_is_a_plus(self):
        scene = generate(SceneSpec(num_targets=1, target_sigma_range=(1.0, 1.0), centers=[(10, 10)]))
        expected = np.zeros((64, 64), dtype=np.uint8)
        expected[9:12, 10] = 1
        expected[10, 9:12] = 1
        assert np.array_equal(scene.mask[0], expected)

    def test_targets_respect_separation(self):
        for seed in range(10):
            targets = generate(SceneSpec(num_targets=3, seed=seed)).targets
            for i, a in enumerate(targets):
                for b in targets[i + 1:]:
                    assert np.hypot(a.row - b.row, a.col - b.col) >= 8.0

    def test_no_targets(self):
        scene = generate(SceneSpec(num_targets=0))
        assert not scene.mask.any()

    def test_crowded_scene_fails(self):
        with pytest.raises(GenerationError):
            generate(SceneSpec(width=16, height=16, num_targets=5, min_separation=20.0))

    def test_centre_on_the_border_fails(self):
        with pytest.raises(GenerationError):
            generate(SceneSpec(num_targets=1, centers=[(0, 0)]))

    def test_centre_count_must_match(self):
        with pytest.raises(ValidationError):
            SceneSpec(num_targets=2, centers=[(10, 10)])

    def test_sigma_range_order(self):
        with pytest.raises(ValidationError):
            SceneSpec(target_sigma_range=(2.0, 1.0))


class TestDataset:
    def test_layout(self, dataset_dir):
        manifest = read_manifest(dataset_dir)
        assert manifest.count == 3
        assert [entry.image for entry in manifest.entries] == [
            "images/0000.pgm", "images/0001.pgm", "images/0002.pgm"
        ]
        assert read_pgm_raw(dataset_dir / "images" / "0000.pgm")[1] == 65535
        assert read_pgm_raw(dataset_dir / "masks" / "0000.pgm")[1] == 255

    def test_samples(self, dataset_dir):
        _, samples = load_dataset(dataset_dir)
        assert [s.name for s in samples] == ["0000", "0001", "0002"]
        assert samples[0].image.shape == (1, 32, 32)
        assert set(np.unique(samples[0].mask)) <= {0, 1}

    def test_masks_match_regenerated_scenes(self, dataset_dir):
        manifest, samples = load_dataset(dataset_dir)
        for entry, sample in zip(manifest.entries, samples):
            scene = generate(manifest.spec.model_copy(update={"seed": entry.seed}))
            assert np.array_equal(sample.mask, scene.mask)
            assert np.allclose(sample.image, scene.image, atol=0.5 / 65535 + 1e-12)

    def test_byte_identical_regeneration(self, tmp_path):
        write_dataset(tmp_path / "a", count=2, size=32, seed=9)
        write_dataset(tmp_path / "b", count=2, size=32, seed=9)
        for path in sorted((tmp_path / "a").rglob("*")):
            if path.is_file():
                twin = tmp_path / "b" / path.relative_to(tmp_path / "a")
                assert path.read_bytes() == twin.read_bytes(), path.name

    def test_scene_seeds_are_distinct(self):
        seeds = scene_seeds(0, 50)
        assert len(set(seeds)) == 50
        assert scene_seeds(0, 3) == seeds[:3]

    def test_size_must_divide(self, tmp_path):
        with pytest.raises(DimensionError):
            write_dataset(tmp_path, count=1, size=40, seed=0)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(InputError):
            load_dataset(tmp_path)

    def test_corrupt_manifest(self, dataset_dir):
        (dataset_dir / MANIFEST_NAME).write_text('{"seed": -1}')
        with pytest.raises(FormatError):
            load_dataset(dataset_dir)

    def test_mask_dir_accepts_root(self, dataset_dir):
        names = [name for name, _ in load_mask_dir(dataset_dir)]
        assert names == ["0000", "0001", "0002"]
        assert np.array_equal(load_mask(dataset_dir / "masks" / "0001.pgm"), load_mask_dir(dataset_dir)[1][1])

    def test_mask_dir_skips_probability_maps(self, tmp_path):
        write_pgm(tmp_path / "a.pgm", np.zeros((4, 4)))
        write_pgm(tmp_path / "a.prob.pgm", np.full((4, 4), 0.3), bits=16)
        assert [name for name, _ in load_mask_dir(tmp_path)] == ["a"]

    def test_mask_dir_of_only_probability_maps(self, tmp_path):
        write_pgm(tmp_path / "a.prob.pgm", np.full((4, 4), 0.3), bits=16)
        with pytest.raises(InputError):
            load_mask_dir(tmp_path)

    @pytest.mark.parametrize("count, seed", [(-1, 0), (1, -1), (1, 2 ** 64)])
    def test_write_rejects_bad_count_and_seed(self, tmp_path, count, seed):
        with pytest.raises(InputError):
            write_dataset(tmp_path / "d", count=count, size=32, seed=seed)
        assert not (tmp_path / "d").exists()
