"""Raster file I/O: 8-bit PNG and the raw "ERPF" float32 container.

PNG conversion uses ``value / 255`` on read and ``round(value * 255)``
clamped to ``[0, 255]`` on write.  The ERPF container is a 16-byte header
(magic ``ERPF``, u32 H, u32 W, u32 C, little-endian) followed by C planar
``H*W`` float32 little-endian planes; extra payload after the planes is
preserved for composite formats (noise grids append a counts plane).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, ShapeError

ERPF_MAGIC = b"ERPF"


def load_png(path) -> np.ndarray:
    """Read a PNG as ``(H, W, C)`` float64 in [0, 1]; C follows the file mode."""
    try:
        with Image.open(path) as im:
            if im.mode in ("L", "I;16", "I"):
                arr = np.asarray(im.convert("L"), dtype=np.float64)[..., None]
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"cannot read PNG {path}: {exc}") from exc
    return arr / 255.0


def save_png(img: np.ndarray, path) -> None:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ShapeError(f"PNG output needs (H, W, 1|3), got {img.shape}")
    quant = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    mode = "L" if quant.shape[2] == 1 else "RGB"
    Image.fromarray(quant.squeeze(-1) if mode == "L" else quant, mode=mode).save(Path(path))


def erpf_header(h: int, w: int, c: int) -> bytes:
    return ERPF_MAGIC + struct.pack("<III", h, w, c)


def save_erpf(arr: np.ndarray, path, extra: bytes = b"") -> None:
    """Write a planar float32 ERPF dump; ``extra`` bytes follow the planes."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3:
        raise ShapeError(f"ERPF output needs (H, W, C), got {arr.shape}")
    h, w, c = arr.shape
    planes = np.ascontiguousarray(np.moveaxis(arr, 2, 0), dtype="<f4")
    with open(path, "wb") as f:
        f.write(erpf_header(h, w, c))
        f.write(planes.tobytes())
        if extra:
            f.write(extra)


def load_erpf(path) -> np.ndarray:
    arr, _ = load_erpf_with_extra(path)
    return arr


def load_erpf_with_extra(path):
    """Read an ERPF dump, returning ``(array, trailing_bytes)``."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != ERPF_MAGIC:
        raise FormatError(f"{path}: not an ERPF file (bad magic)")
    h, w, c = struct.unpack("<III", data[4:16])
    if h <= 0 or w <= 0 or c <= 0:
        raise FormatError(f"{path}: non-positive ERPF dimensions {h}x{w}x{c}")
    n = h * w * c
    end = 16 + 4 * n
    if len(data) < end:
        raise FormatError(f"{path}: truncated ERPF payload")
    planes = np.frombuffer(data[16:end], dtype="<f4").reshape(c, h, w)
    return np.moveaxis(planes, 0, 2).astype(np.float64), data[end:]
