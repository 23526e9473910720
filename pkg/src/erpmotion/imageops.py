"""Plain raster helpers shared by the estimator, metrics and curation."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

# Rec. 601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


def to_gray(img: np.ndarray) -> np.ndarray:
    """Collapse an ``(H, W, C)`` image to ``(H, W)`` grayscale."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 1:
        return img[..., 0]
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ _LUMA
    raise ShapeError(f"cannot convert shape {img.shape} to grayscale")


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel-centre sampling and edge clamp.

    Works on ``(H, W)`` or ``(H, W, C)`` arrays.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"invalid resize target {out_h}x{out_w}")
    ii = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    jj = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    i0 = np.floor(ii).astype(np.int64)
    j0 = np.floor(jj).astype(np.int64)
    i1 = np.minimum(i0 + 1, h - 1)
    j1 = np.minimum(j0 + 1, w - 1)
    fi = ii - i0
    fj = jj - j0
    if img.ndim == 3:
        fi = fi[:, None, None]
        fj = fj[None, :, None]
    else:
        fi = fi[:, None]
        fj = fj[None, :]
    top = img[np.ix_(i0, j0)] * (1 - fj) + img[np.ix_(i0, j1)] * fj
    bot = img[np.ix_(i1, j0)] * (1 - fj) + img[np.ix_(i1, j1)] * fj
    return top * (1 - fi) + bot * fi


def resize_min_dim(img: np.ndarray, min_dim: int) -> np.ndarray:
    """Resize so the smaller side equals ``min_dim``, preserving aspect."""
    h, w = img.shape[:2]
    if min(h, w) == min_dim:
        return np.asarray(img, dtype=np.float64)
    scale = min_dim / min(h, w)
    return resize_bilinear(img, max(1, round(h * scale)), max(1, round(w * scale)))
