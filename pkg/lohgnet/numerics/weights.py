"""
LOHGW001 weight container.

Layout of a container file:

    offset 0   8 bytes   magic b"LOHGW001"
    offset 8   8 bytes   header length L, unsigned 64-bit little-endian
    offset 16  L bytes   UTF-8 JSON header
    offset 16+L          payload: raw little-endian arrays, back to back

The header is ``{"tensors": [{"name", "dtype", "shape", "offset",
"nbytes"}, ...], "meta": {...}}`` where ``dtype`` is "f32" or "f64" and
``offset`` counts from the start of the payload. Keys are sorted and the
tensor list keeps insertion order, so equal weights produce equal bytes.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from lohgnet.core.constants import WEIGHTS_MAGIC
from lohgnet.core.errors import FormatError, InputError

_DTYPE_NAMES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_NAME_OF = {np.dtype("float32"): "f32", np.dtype("float64"): "f64"}
_PREFIX = len(WEIGHTS_MAGIC) + 8


def encode_weights(arrays: Mapping[str, np.ndarray], meta: Optional[Dict[str, Any]] = None) -> bytes:
    """Serialize named arrays (and optional metadata) to container bytes."""
    entries = []
    chunks = []
    offset = 0
    for name, array in arrays.items():
        array = np.asarray(array)
        if array.dtype not in _NAME_OF:
            raise FormatError(f"unsupported dtype {array.dtype} for tensor {name!r}")
        dtype_name = _NAME_OF[array.dtype]
        raw = np.ascontiguousarray(array, dtype=_DTYPE_NAMES[dtype_name]).tobytes()
        entries.append({
            "name": name,
            "dtype": dtype_name,
            "shape": list(array.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)

    header = json.dumps(
        {"tensors": entries, "meta": meta or {}},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    return WEIGHTS_MAGIC + struct.pack("<Q", len(header)) + header + b"".join(chunks)


def decode_weights(blob: bytes) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Parse container bytes.

    Returns:
        (name -> array mapping in file order, metadata dict)

    Raises:
        FormatError: Bad magic, truncated header/payload, malformed JSON
    """
    if len(blob) < _PREFIX:
        raise FormatError("file shorter than container prefix", offset=len(blob))
    if blob[: len(WEIGHTS_MAGIC)] != WEIGHTS_MAGIC:
        raise FormatError("bad magic, not a LOHGW001 container", offset=0)

    (header_len,) = struct.unpack("<Q", blob[len(WEIGHTS_MAGIC):_PREFIX])
    payload_start = _PREFIX + header_len
    if payload_start > len(blob):
        raise FormatError("truncated header", offset=len(blob))
    try:
        header = json.loads(blob[_PREFIX:payload_start].decode("utf-8"))
        entries = header["tensors"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed header: {exc}", offset=_PREFIX) from exc

    arrays: Dict[str, np.ndarray] = {}
    for entry in entries:
        try:
            name = entry["name"]
            dtype = _DTYPE_NAMES[entry["dtype"]]
            shape = tuple(int(n) for n in entry["shape"])
            start = payload_start + int(entry["offset"])
            nbytes = int(entry["nbytes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed tensor entry {entry!r}", offset=_PREFIX) from exc
        if nbytes != int(np.prod(shape, dtype=np.int64)) * dtype.itemsize:
            raise FormatError(f"size of {name!r} does not match its shape", offset=start)
        if start + nbytes > len(blob):
            raise FormatError(f"truncated payload for {name!r}", offset=len(blob))
        array = np.frombuffer(blob, dtype=dtype, count=nbytes // dtype.itemsize, offset=start)
        arrays[name] = array.reshape(shape).astype(dtype.newbyteorder("="))

    return arrays, header.get("meta", {})


def save_weights(
    path: Path,
    arrays: Mapping[str, np.ndarray],
    meta: Optional[Dict[str, Any]] = None,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_weights(arrays, meta))


def load_weights(path: Path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    try:
        blob = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise InputError(f"weights file not found: {path}") from exc
    return decode_weights(blob)
