"""Tests for the LOHGW001 weight container."""

import json
import struct

import numpy as np
import pytest

from lohgnet.core.constants import WEIGHTS_MAGIC
from lohgnet.core.errors import FormatError, InputError
from lohgnet.numerics.weights import decode_weights, encode_weights, load_weights, save_weights


def _arrays(rng):
    return {
        "conv.weight": rng.standard_normal((2, 1, 3, 3)).astype(np.float32),
        "theta": np.eye(3),
    }


class TestLayout:
    def test_prefix_and_header(self, rng):
        blob = encode_weights(_arrays(rng), {"kind": "test"})
        assert blob[:8] == WEIGHTS_MAGIC
        (length,) = struct.unpack("<Q", blob[8:16])
        header = json.loads(blob[16:16 + length])
        assert header["meta"] == {"kind": "test"}
        assert [t["name"] for t in header["tensors"]] == ["conv.weight", "theta"]
        assert [t["dtype"] for t in header["tensors"]] == ["f32", "f64"]
        assert header["tensors"][1]["offset"] == 18 * 4
        assert len(blob) == 16 + length + 18 * 4 + 9 * 8

    def test_equal_weights_equal_bytes(self, rng):
        arrays = _arrays(rng)
        assert encode_weights(arrays, {"b": 1, "a": 2}) == encode_weights(dict(arrays), {"a": 2, "b": 1})

    def test_round_trip_keeps_order_and_dtype(self, rng, tmp_path):
        arrays = _arrays(rng)
        save_weights(tmp_path / "nested" / "w.lohgw", arrays, {"step": 3})
        loaded, meta = load_weights(tmp_path / "nested" / "w.lohgw")
        assert list(loaded) == list(arrays)
        assert meta == {"step": 3}
        for name, array in arrays.items():
            assert loaded[name].dtype == array.dtype
            assert np.array_equal(loaded[name], array)

    def test_unsupported_dtype(self):
        with pytest.raises(FormatError):
            encode_weights({"steps": np.arange(3)})


class TestMalformed:
    def test_bad_magic(self, rng):
        blob = b"LOHGW002" + encode_weights(_arrays(rng))[8:]
        with pytest.raises(FormatError) as excinfo:
            decode_weights(blob)
        assert excinfo.value.offset == 0

    def test_short_file(self):
        with pytest.raises(FormatError):
            decode_weights(WEIGHTS_MAGIC)

    def test_truncated_header(self):
        with pytest.raises(FormatError):
            decode_weights(WEIGHTS_MAGIC + struct.pack("<Q", 1000) + b"{}")

    def test_truncated_payload(self, rng):
        blob = encode_weights(_arrays(rng))
        with pytest.raises(FormatError) as excinfo:
            decode_weights(blob[:-1])
        assert excinfo.value.offset == len(blob) - 1

    def test_malformed_json(self):
        with pytest.raises(FormatError) as excinfo:
            decode_weights(WEIGHTS_MAGIC + struct.pack("<Q", 3) + b"{x}")
        assert excinfo.value.offset == 16

    def test_size_disagrees_with_shape(self):
        header = json.dumps({"tensors": [{"name": "a", "dtype": "f32", "shape": [2], "offset": 0, "nbytes": 4}]})
        payload = header.encode()
        with pytest.raises(FormatError):
            decode_weights(WEIGHTS_MAGIC + struct.pack("<Q", len(payload)) + payload + b"\x00" * 8)

    def test_entry_without_name(self):
        header = json.dumps({"tensors": [{"dtype": "f32", "shape": [1], "offset": 0, "nbytes": 4}]})
        payload = header.encode()
        with pytest.raises(FormatError):
            decode_weights(WEIGHTS_MAGIC + struct.pack("<Q", len(payload)) + payload + b"\x00" * 4)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_weights(tmp_path / "absent.lohgw")
