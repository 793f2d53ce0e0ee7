"""Binary raster formats: PPM (P6) color, PGM (P5) labels, PFM (Pf) float rasters.

All rasters in this package are numpy arrays indexed [row, col] with row 0 at
the top of the image. PFM files follow the usual bottom-to-top row order and
are written little-endian (scale field -1.0). Writers are deterministic:
identical arrays produce identical bytes.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

__all__ = [
    "write_ppm",
    "read_ppm",
    "write_pgm",
    "read_pgm",
    "write_pfm",
    "read_pfm",
    "atomic_write_bytes",
]


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via a temp file + rename so readers never observe partial files."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_token(fh) -> bytes:
    tok = b""
    while True:
        ch = fh.read(1)
        if ch == b"":
            raise ValueError("unexpected end of file in header")
        if ch.isspace():
            if tok:
                return tok
            continue
        tok += ch


def write_ppm(path: str, image: np.ndarray) -> None:
    """8-bit binary PPM from an (H, W, 3) float array in [0, 1]."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {image.shape}")
    q = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + q.tobytes())


def read_ppm(path: str) -> np.ndarray:
    """(H, W, 3) float64 array in [0, 1]."""
    with open(path, "rb") as fh:
        if _read_token(fh) != b"P6":
            raise ValueError(f"{path}: not a binary PPM (P6)")
        w, h, maxval = (int(_read_token(fh)) for _ in range(3))
        if maxval != 255:
            raise ValueError(f"{path}: unsupported maxval {maxval}")
        data = fh.read(w * h * 3)
    if len(data) != w * h * 3:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).astype(np.float64) / 255.0


def write_pgm(path: str, labels: np.ndarray) -> None:
    """8-bit binary PGM from an (H, W) integer array with values in [0, 255]."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"expected (H, W) labels, got {labels.shape}")
    if labels.min() < 0 or labels.max() > 255:
        raise ValueError("label values must fit in [0, 255]")
    header = f"P5\n{labels.shape[1]} {labels.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + labels.astype(np.uint8).tobytes())


def read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        if _read_token(fh) != b"P5":
            raise ValueError(f"{path}: not a binary PGM (P5)")
        w, h, maxval = (int(_read_token(fh)) for _ in range(3))
        if maxval != 255:
            raise ValueError(f"{path}: unsupported maxval {maxval}")
        data = fh.read(w * h)
    if len(data) != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w).astype(np.int64)


def write_pfm(path: str, raster: np.ndarray) -> None:
    """Grayscale PFM (Pf), float32 little-endian, from an (H, W) array."""
    raster = np.asarray(raster, dtype=np.float32)
    if raster.ndim != 2:
        raise ValueError(f"expected (H, W) raster, got {raster.shape}")
    header = f"Pf\n{raster.shape[1]} {raster.shape[0]}\n-1.0\n".encode("ascii")
    # PFM stores rows bottom-to-top.
    body = raster[::-1].astype("<f4").tobytes()
    atomic_write_bytes(path, header + body)


def read_pfm(path: str) -> np.ndarray:
    """(H, W) float64 array, row 0 at the top."""
    with open(path, "rb") as fh:
        magic = _read_token(fh)
        if magic != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM (Pf), got {magic!r}")
        w, h = int(_read_token(fh)), int(_read_token(fh))
        scale = float(_read_token(fh))
        data = fh.read(w * h * 4)
    if len(data) != w * h * 4:
        raise ValueError(f"{path}: truncated float data")
    dtype = "<f4" if scale < 0 else ">f4"
    raster = np.frombuffer(data, dtype=dtype).reshape(h, w)
    return raster[::-1].astype(np.float64)
