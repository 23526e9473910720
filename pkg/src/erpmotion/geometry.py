"""Equirectangular (ERP) sphere geometry: pixel<->direction maps, SO(3)
rotations, panorama rotation with bilinear resampling, circular padding.

Conventions used throughout the toolkit (every other module inherits them):

* Images are ``(H, W, C)`` float64 arrays, row ``i`` from the top, column
  ``j`` from the left, with the ERP aspect ``W == 2 * H`` for all spherical
  operations.
* Pixel ``(i, j)`` is centred at ``(i + 0.5, j + 0.5)`` in continuous
  coordinates.  Longitude ``lam = ((j + 0.5) / W) * 2*pi - pi`` and latitude
  ``phi = pi/2 - ((i + 0.5) / H) * pi``.
* Axes: ``+y`` is the north pole (row 0 side), ``+z`` is longitude 0
  (centre column), ``+x`` is longitude +90 deg.  Direction of a pixel:
  ``(cos(phi) sin(lam), sin(phi), cos(phi) cos(lam))``.
* Euler angles compose as ``R = R_y(yaw) @ R_x(pitch) @ R_z(roll)``,
  right-handed, degrees.
* ``rotate_erp(img, R)`` resamples ``out(p) = img(dir_to_pixel(R^T x(p)))``.
  Two rotations compose as ``rotate_erp(rotate_erp(I, Ra), Rb) ==
  rotate_erp(I, Rb @ Ra)``.  Yaw about ``+y`` by ``alpha`` degrees is a pure
  horizontal cyclic shift of ``alpha / 360 * W`` columns (exact when that is
  an integer).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ConfigError, ShapeError

__all__ = [
    "require_erp",
    "validate_image",
    "pixel_to_dir",
    "dir_to_pixel",
    "rotation_from_euler",
    "rot_x",
    "rot_y",
    "rot_z",
    "is_rotation",
    "check_rotation",
    "polar_orthonormalize",
    "geodesic_distance",
    "rotate_erp",
    "bilinear_sample",
    "circular_pad",
    "crop_pad",
]


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check the basic raster invariants and return the array.

    ``img`` must be ``(H, W, C)`` with ``H, W >= 2``, ``C`` 1 or 3, all
    values finite.
    """
    img = np.asarray(img)
    if img.ndim != 3:
        raise ShapeError(f"expected (H, W, C) image, got shape {img.shape}")
    h, w, c = img.shape
    if h < 2 or w < 2:
        raise ShapeError(f"image too small: {h}x{w}")
    if c not in (1, 3):
        raise ShapeError(f"channel count must be 1 or 3, got {c}")
    if not np.isfinite(img).all():
        raise ShapeError("image contains non-finite values")
    return img


def require_erp(img: np.ndarray) -> np.ndarray:
    """Validate an image and additionally require the 2:1 ERP aspect."""
    img = validate_image(img)
    h, w = img.shape[:2]
    if w != 2 * h:
        raise ShapeError(f"ERP aspect requires W == 2H, got {h}x{w}")
    return img


def _require_erp_dims(h: int, w: int) -> None:
    if w != 2 * h:
        raise ShapeError(f"ERP aspect requires W == 2H, got H={h}, W={w}")


def pixel_to_dir(i, j, h: int, w: int) -> np.ndarray:
    """Unit sphere direction of continuous pixel coordinates ``(i, j)``.

    Accepts scalars or arrays; any real coordinates are allowed (longitude
    is periodic and latitude overshoot continues smoothly past the poles,
    which is the geometrically correct wrap).  Returns ``(..., 3)``.
    """
    _require_erp_dims(h, w)
    i = np.asarray(i, dtype=np.float64)
    j = np.asarray(j, dtype=np.float64)
    lam = ((j + 0.5) / w) * (2.0 * np.pi) - np.pi
    phi = np.pi / 2.0 - ((i + 0.5) / h) * np.pi
    cp = np.cos(phi)
    return np.stack([cp * np.sin(lam), np.sin(phi), cp * np.cos(lam)], axis=-1)


def dir_to_pixel(d: np.ndarray, h: int, w: int, check: bool = True):
    """Continuous pixel coordinates of unit directions ``d`` of shape (..., 3).

    Inverse of :func:`pixel_to_dir` on the principal range
    ``j in [-0.5, W - 0.5)``, ``i in [-0.5, H - 0.5]``.  At the exact poles
    longitude is degenerate; ``atan2(0, 0) == 0`` makes the returned column
    the centre ``W/2 - 0.5`` by convention.
    """
    _require_erp_dims(h, w)
    d = np.asarray(d, dtype=np.float64)
    if d.shape[-1] != 3:
        raise ShapeError(f"direction array must have a trailing 3-axis, got {d.shape}")
    if check:
        norms = np.linalg.norm(d, axis=-1)
        if not np.allclose(norms, 1.0, rtol=0.0, atol=1e-9):
            raise ConfigError("directions must be unit-norm within 1e-9")
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    # atan2-based latitude is well conditioned near the poles, unlike arcsin.
    phi = np.arctan2(y, np.hypot(x, z))
    lam = np.arctan2(x, z)
    i = (0.5 - phi / np.pi) * h - 0.5
    j = ((lam + np.pi) / (2.0 * np.pi)) * w - 0.5
    # atan2 returns lam = +pi for the antimeridian; fold onto -0.5.
    j = np.where(j >= w - 0.5, j - w, j)
    return i, j


def rot_x(degrees: float) -> np.ndarray:
    a = np.deg2rad(degrees)
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def rot_y(degrees: float) -> np.ndarray:
    a = np.deg2rad(degrees)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def rot_z(degrees: float) -> np.ndarray:
    a = np.deg2rad(degrees)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


def rotation_from_euler(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Rotation from Euler angles in degrees, composed ``R_y @ R_x @ R_z``.

    Yaw turns about the polar axis (+y), pitch about +x, roll about +z;
    this yaw-first order matches the dominant panoramic camera motion.
    """
    if not (np.isfinite(yaw) and np.isfinite(pitch) and np.isfinite(roll)):
        raise ConfigError("Euler angles must be finite")
    return rot_y(yaw) @ rot_x(pitch) @ rot_z(roll)


def is_rotation(m: np.ndarray, tol: float = 1e-9) -> bool:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        return False
    if not np.isfinite(m).all():
        return False
    ortho = np.abs(m.T @ m - np.eye(3)).max() <= tol
    return bool(ortho and abs(np.linalg.det(m) - 1.0) <= tol)


def check_rotation(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if not is_rotation(m, tol):
        raise ConfigError("matrix is not a valid rotation (orthonormal, det +1)")
    return m


def polar_orthonormalize(m: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (polar projection)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=np.float64))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def geodesic_distance(ra: np.ndarray, rb: np.ndarray) -> float:
    """Angle in degrees between two rotations: arccos((tr(Ra^T Rb) - 1) / 2)."""
    ra = np.asarray(ra, dtype=np.float64)
    rb = np.asarray(rb, dtype=np.float64)
    t = (np.trace(ra.T @ rb) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(t, -1.0, 1.0))))


def _fold_indices(i: np.ndarray, j: np.ndarray, h: int, w: int):
    """Fold integer pixel indices into range by the ERP connectivity rules.

    Rows reflect across the edge rows with a W/2 longitude shift per
    reflection (the pole branches of the boundary remap); columns wrap
    modulo W.  Applied repeatedly until rows land in ``[0, H)``.
    """
    i = np.asarray(i, dtype=np.int64).copy()
    j = np.asarray(j, dtype=np.int64).copy()
    half = w // 2
    while True:
        neg = i < 0
        over = i >= h
        out = neg | over
        if not out.any():
            break
        i = np.where(neg, -i, np.where(over, 2 * (h - 1) - i, i))
        j = np.where(out, j + half, j)
    return i, np.mod(j, w)


def bilinear_sample(img: np.ndarray, i, j) -> np.ndarray:
    """Bilinear interpolation of ``img`` at continuous coordinates.

    The four neighbouring pixel centres are at integer indices; neighbours
    that fall outside the raster are remapped by the spherical boundary
    rules (longitude wraps, latitude reflects across the poles with a W/2
    longitude shift) before lookup, so sampling agrees with the noise-warp
    boundary remap.  Returns ``(..., C)``.
    """
    img = validate_image(img)
    h, w = img.shape[:2]
    i = np.asarray(i, dtype=np.float64)
    j = np.asarray(j, dtype=np.float64)
    i0 = np.floor(i).astype(np.int64)
    j0 = np.floor(j).astype(np.int64)
    fi = (i - i0)[..., None]
    fj = (j - j0)[..., None]
    flat = img.reshape(h * w, img.shape[2])

    def lookup(ii, jj):
        fi_, fj_ = _fold_indices(ii, jj, h, w)
        return flat[fi_ * w + fj_]

    v00 = lookup(i0, j0)
    v01 = lookup(i0, j0 + 1)
    v10 = lookup(i0 + 1, j0)
    v11 = lookup(i0 + 1, j0 + 1)
    top = v00 * (1.0 - fj) + v01 * fj
    bot = v10 * (1.0 - fj) + v11 * fj
    return top * (1.0 - fi) + bot * fi


@lru_cache(maxsize=8)
def _dir_grid(h: int, w: int) -> np.ndarray:
    ii, jj = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return pixel_to_dir(ii, jj, h, w)


def rotate_erp(img: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    """Resample a panorama under a rotation: ``out(p) = img(R^T x(p))``.

    Source coordinates within 1e-9 of a pixel centre are snapped to it, so
    the identity rotation is bit-exact and yaws by an integer number of
    columns reduce to exact cyclic shifts.
    """
    img = require_erp(img)
    rotation = check_rotation(rotation)
    h, w = img.shape[:2]
    dirs = _dir_grid(h, w)
    rotated = dirs @ rotation  # row-vector form of R^T x per pixel
    si, sj = dir_to_pixel(rotated, h, w, check=False)
    for s in (si, sj):
        snapped = np.rint(s)
        near = np.abs(s - snapped) < 1e-9
        s[near] = snapped[near]
    return bilinear_sample(img, si, sj)


def circular_pad(img: np.ndarray, p: int) -> np.ndarray:
    """Pad left/right with ``p`` columns from the opposite side.

    The left pad holds columns ``[W-p, W)``, the right pad columns
    ``[0, p)``; output width is ``W + 2p``.
    """
    img = np.asarray(img)
    if img.ndim < 2:
        raise ShapeError(f"expected at least 2-D raster, got shape {img.shape}")
    w = img.shape[1]
    if not 0 < p <= w // 2:
        raise ConfigError(f"pad width must satisfy 0 < p <= W/2, got p={p}, W={w}")
    return np.concatenate([img[:, w - p:], img, img[:, :p]], axis=1)


def crop_pad(img: np.ndarray, p: int) -> np.ndarray:
    """Inverse of :func:`circular_pad`: drop ``p`` columns from each side."""
    img = np.asarray(img)
    if img.ndim < 2:
        raise ShapeError(f"expected at least 2-D raster, got shape {img.shape}")
    w = img.shape[1]
    if p <= 0 or w - 2 * p < 2:
        raise ConfigError(f"cannot crop pad {p} from width {w}")
    return img[:, p:w - p]
