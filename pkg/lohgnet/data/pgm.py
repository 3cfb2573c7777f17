"""
Binary PGM (P5) reading and writing.

Header: ``P5``, width, height and maxval as ASCII decimals separated by
whitespace (``#`` comments allowed between tokens), then exactly one
whitespace byte and the raster. maxval < 256 stores one byte per pixel;
larger maxvals store two bytes, most significant first.
"""

import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from lohgnet.core.errors import FormatError, InputError

logger = logging.getLogger(__name__)

MAGIC = b"P5"
MAXVAL_8 = 255
MAXVAL_16 = 65535
_WHITESPACE = b" \t\n\r\v\f"


def _next_token(blob: bytes, pos: int) -> Tuple[bytes, int]:
    """Skip whitespace and comments, return (token, position after it)."""
    while pos < len(blob):
        if blob[pos] in _WHITESPACE:
            pos += 1
        elif blob[pos:pos + 1] == b"#":
            end = blob.find(b"\n", pos)
            pos = len(blob) if end < 0 else end + 1
        else:
            break
    start = pos
    while pos < len(blob) and blob[pos] not in _WHITESPACE:
        pos += 1
    if start == pos:
        raise FormatError("truncated header", offset=start)
    return blob[start:pos], pos


def _header_int(blob: bytes, pos: int, name: str) -> Tuple[int, int]:
    token, end = _next_token(blob, pos)
    if not token.isdigit():
        raise FormatError(f"{name} is not a decimal integer: {token!r}", offset=end - len(token))
    return int(token), end


def decode_pgm(blob: bytes) -> Tuple[np.ndarray, int]:
    """
    Parse P5 bytes.

    Returns:
        (H x W integer raster, maxval)

    Raises:
        FormatError: Wrong magic, malformed header or truncated raster
    """
    if blob[:2] != MAGIC:
        raise FormatError(f"not a binary PGM (magic {blob[:2]!r}, expected {MAGIC!r})", offset=0)
    width, pos = _header_int(blob, 2, "width")
    height, pos = _header_int(blob, pos, "height")
    maxval, pos = _header_int(blob, pos, "maxval")
    if width < 1 or height < 1:
        raise FormatError(f"image extents must be positive, got {width}x{height}", offset=pos)
    if not 1 <= maxval <= MAXVAL_16:
        raise FormatError(f"maxval must be in [1, 65535], got {maxval}", offset=pos)
    if pos >= len(blob) or blob[pos] not in _WHITESPACE:
        raise FormatError("missing whitespace after maxval", offset=pos)
    pos += 1

    dtype = np.dtype(">u2") if maxval > MAXVAL_8 else np.dtype("u1")
    nbytes = width * height * dtype.itemsize
    if len(blob) - pos < nbytes:
        raise FormatError(f"truncated raster: need {nbytes} bytes, have {len(blob) - pos}", offset=len(blob))
    raster = np.frombuffer(blob, dtype=dtype, count=width * height, offset=pos).reshape(height, width)
    if raster.max() > maxval:
        raise FormatError(f"sample exceeds maxval {maxval}", offset=pos)
    return raster.astype(np.uint16 if maxval > MAXVAL_8 else np.uint8), maxval


def encode_pgm(raster: np.ndarray, maxval: int) -> bytes:
    raster = np.asarray(raster)
    if raster.ndim != 2:
        raise FormatError(f"PGM rasters are 2-D, got shape {raster.shape}")
    if raster.dtype.kind not in "ui" or raster.min() < 0 or raster.max() > maxval:
        raise FormatError(f"raster values must be integers in [0, {maxval}]")
    dtype = np.dtype(">u2") if maxval > MAXVAL_8 else np.dtype("u1")
    header = b"P5\n%d %d\n%d\n" % (raster.shape[1], raster.shape[0], maxval)
    return header + raster.astype(dtype).tobytes()


def quantize(image: np.ndarray, bits: int = 8) -> Tuple[np.ndarray, int]:
    """Scale a [0, 1] image to integer levels of the given depth."""
    maxval = {8: MAXVAL_8, 16: MAXVAL_16}[bits]
    levels = np.rint(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * maxval)
    return levels.astype(np.uint8 if bits == 8 else np.uint16), maxval


def read_pgm_raw(path: Union[str, Path]) -> Tuple[np.ndarray, int]:
    try:
        blob = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise InputError(f"image not found: {path}") from exc
    try:
        return decode_pgm(blob)
    except FormatError as exc:
        located = FormatError(f"{path}: {exc}")
        located.offset = exc.offset
        raise located from exc


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    """Read a P5 PGM as float64 values in [0, 1] (samples / maxval)."""
    raster, maxval = read_pgm_raw(path)
    return raster.astype(np.float64) / maxval


def write_pgm(path: Union[str, Path], image: np.ndarray, bits: int = 8) -> Path:
    """
    Write an image as P5 PGM.

    Integer images are stored as-is (maxval 255 for 8 bits, 65535 for 16);
    floating images are taken as [0, 1] and quantized to the bit depth.
    """
    image = np.asarray(image)
    image = np.squeeze(image) if image.ndim > 2 else image
    if image.dtype.kind in "ui":
        raster, maxval = image, MAXVAL_8 if bits == 8 else MAXVAL_16
    else:
        raster, maxval = quantize(image, bits)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_pgm(raster, maxval))
    logger.debug("wrote %s (%dx%d, maxval %d)", path, raster.shape[1], raster.shape[0], maxval)
    return path
