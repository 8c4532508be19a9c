"""Minimal netpbm and raw-lattice file IO for depth and label images.

Depth interchange formats:

* 16-bit binary PGM (``P5``, maxval 65535): depth in millimeters, 0 marks an
  invalid pixel.  Widely inspectable but quantized to 1 mm.
* raw float64 (``RF64`` header): loss-free depth in meters, NaN marks an
  invalid pixel.  Use this for exactness tests.

Label lattices travel as 8-bit PGM; color segmentations as binary PPM.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

RAW_MAGIC = b"RF64"


def _read_pnm_header(data: bytes, magic: bytes) -> tuple[int, int, int, int]:
    """Parse a binary netpbm header; returns (width, height, maxval, offset)."""
    if not data.startswith(magic):
        raise ValueError(f"expected {magic.decode()} file, got {data[:2]!r}")
    pos = len(magic)
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise ValueError(f"malformed netpbm header token {token!r}")
        fields.append(int(token))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    return width, height, maxval, pos


def write_pgm16(path: str | Path, values: np.ndarray) -> None:
    """Write a uint16 lattice as big-endian binary PGM (maxval 65535)."""
    values = np.asarray(values)
    if values.dtype != np.uint16:
        raise ValueError(f"expected uint16 data, got {values.dtype}")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode())
        fh.write(values.astype(">u2").tobytes())


def read_pgm16(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    width, height, maxval, offset = _read_pnm_header(data, b"P5")
    if maxval != 65535:
        raise ValueError(f"{path}: expected 16-bit PGM (maxval 65535), got {maxval}")
    expected = width * height * 2
    raw = data[offset : offset + expected]
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(raw, dtype=">u2").reshape(height, width).astype(np.uint16)


def write_pgm8(path: str | Path, values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.dtype != np.uint8:
        raise ValueError(f"expected uint8 data, got {values.dtype}")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(values.tobytes())


def read_pgm8(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    width, height, maxval, offset = _read_pnm_header(data, b"P5")
    if maxval != 255:
        raise ValueError(f"{path}: expected 8-bit PGM (maxval 255), got {maxval}")
    expected = width * height
    raw = data[offset : offset + expected]
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy()


def write_ppm(path: str | Path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as binary PPM."""
    rgb = np.asarray(rgb)
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) uint8 data, got {rgb.dtype} {rgb.shape}")
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    width, height, maxval, offset = _read_pnm_header(data, b"P6")
    if maxval != 255:
        raise ValueError(f"{path}: expected 8-bit PPM (maxval 255), got {maxval}")
    expected = width * height * 3
    raw = data[offset : offset + expected]
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3).copy()


def write_raw_float(path: str | Path, values: np.ndarray) -> None:
    """Write a float lattice as ``RF64 <width> <height>`` + little-endian float64."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected a 2D lattice, got shape {values.shape}")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC + f" {w} {h}\n".encode())
        fh.write(values.astype("<f8").tobytes())


def read_raw_float(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(RAW_MAGIC):
        raise ValueError(f"{path}: not a raw float64 lattice (missing RF64 header)")
    newline = data.index(b"\n")
    parts = data[len(RAW_MAGIC) : newline].split()
    if len(parts) != 2:
        raise ValueError(f"{path}: malformed RF64 header")
    width, height = int(parts[0]), int(parts[1])
    expected = width * height * 8
    raw = data[newline + 1 : newline + 1 + expected]
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(raw, dtype="<f8").reshape(height, width).copy()
