"""Dense flow fields: Middlebury .flo I/O, pixel/spherical conversion,
end-point error, and color-wheel visualisation.

A :class:`FlowField` stores per-pixel displacements ``du`` (positive
rightward) and ``dv`` (positive downward) in pixels.  The sign convention
throughout: flow maps content of frame ``a`` to its location in frame
``b``, i.e. ``a(p) ~ b(p + (dv, du))``.  Horizontal displacements live on a
cylinder; differences are taken wrap-aware into ``(-W/2, W/2]`` wherever
two fields are compared.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError
from .geometry import _dir_grid, dir_to_pixel, pixel_to_dir

FLO_MAGIC = 202021.25


@dataclass(frozen=True)
class FlowField:
    """Dense pixel-space flow, ``du``/``dv`` of shape ``(H, W)``."""

    du: np.ndarray
    dv: np.ndarray

    def __post_init__(self):
        du = np.asarray(self.du, dtype=np.float64)
        dv = np.asarray(self.dv, dtype=np.float64)
        if du.ndim != 2 or du.shape != dv.shape:
            raise ShapeError(f"flow components must share an (H, W) shape, got {du.shape} vs {dv.shape}")
        if not (np.isfinite(du).all() and np.isfinite(dv).all()):
            raise ShapeError("flow contains non-finite values")
        object.__setattr__(self, "du", du)
        object.__setattr__(self, "dv", dv)

    @property
    def shape(self):
        return self.du.shape

    @property
    def h(self) -> int:
        return self.du.shape[0]

    @property
    def w(self) -> int:
        return self.du.shape[1]

    @classmethod
    def zeros(cls, h: int, w: int) -> "FlowField":
        return cls(np.zeros((h, w)), np.zeros((h, w)))

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.du, self.dv)


@dataclass(frozen=True)
class SphericalFlow:
    """Per-pixel 3-vector displacement ``f = x' - x`` on the unit sphere."""

    vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=np.float64)
        if vec.ndim != 3 or vec.shape[2] != 3:
            raise ShapeError(f"spherical flow must be (H, W, 3), got {vec.shape}")
        object.__setattr__(self, "vec", vec)

    @property
    def h(self) -> int:
        return self.vec.shape[0]

    @property
    def w(self) -> int:
        return self.vec.shape[1]

    def endpoint_norms(self) -> np.ndarray:
        """Norm of ``x + f`` per pixel; the invariant keeps these at 1."""
        x = _dir_grid(self.h, self.w)
        return np.linalg.norm(x + self.vec, axis=-1)


def wrap_columns(d: np.ndarray, w: int) -> np.ndarray:
    """Shortest wrapped column difference, mapped into ``(-W/2, W/2]``."""
    half = w / 2.0
    return half - np.mod(half - np.asarray(d, dtype=np.float64), w)


def read_flo(path) -> FlowField:
    """Read a Middlebury .flo file (bit-exact format contract)."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise FormatError(f"{path}: too short for a .flo header")
    (magic,) = struct.unpack("<f", data[:4])
    if magic != FLO_MAGIC:
        raise FormatError(f"{path}: bad .flo magic {magic!r}")
    w, h = struct.unpack("<ii", data[4:12])
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: non-positive .flo dimensions {w}x{h}")
    expected = 12 + 8 * w * h
    if len(data) != expected:
        raise FormatError(f"{path}: payload is {len(data)} bytes, expected {expected}")
    uv = np.frombuffer(data[12:], dtype="<f4").reshape(h, w, 2)
    return FlowField(uv[..., 0].astype(np.float64), uv[..., 1].astype(np.float64))


def write_flo(field: FlowField, path) -> None:
    h, w = field.shape
    uv = np.empty((h, w, 2), dtype="<f4")
    uv[..., 0] = field.du
    uv[..., 1] = field.dv
    with open(path, "wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<ii", w, h))
        f.write(uv.tobytes())


def pixel_to_spherical(field: FlowField) -> SphericalFlow:
    """Lift pixel flow onto the sphere: ``f = dir(p + flow) - dir(p)``.

    Longitude wraps automatically (the direction formula is periodic in the
    column) and row overshoot continues smoothly past the poles.
    """
    h, w = field.shape
    if w != 2 * h:
        raise ShapeError(f"ERP aspect requires W == 2H, got {h}x{w}")
    x = _dir_grid(h, w)
    ii, jj = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    xp = pixel_to_dir(ii + field.dv, jj + field.du, h, w)
    return SphericalFlow(xp - x)


def spherical_to_pixel(sflow: SphericalFlow) -> FlowField:
    """Project spherical flow back to pixel displacements.

    The endpoint ``x + f`` is normalised to unit length before inversion;
    ``du`` is the shortest wrapped column difference.
    """
    h, w = sflow.h, sflow.w
    if w != 2 * h:
        raise ShapeError(f"ERP aspect requires W == 2H, got {h}x{w}")
    x = _dir_grid(h, w)
    e = x + sflow.vec
    norms = np.linalg.norm(e, axis=-1, keepdims=True)
    if np.any(norms <= 0):
        raise ShapeError("spherical flow endpoint collapsed to the origin")
    e = e / norms
    ti, tj = dir_to_pixel(e, h, w, check=False)
    ii, jj = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return FlowField(wrap_columns(tj - jj, w), ti - ii)


def epe_map(est: FlowField, ref: FlowField) -> np.ndarray:
    """Per-pixel end-point error with wrap-aware horizontal differences."""
    if est.shape != ref.shape:
        raise ShapeError(f"flow shapes differ: {est.shape} vs {ref.shape}")
    ddu = wrap_columns(est.du - ref.du, est.w)
    ddv = est.dv - ref.dv
    return np.hypot(ddu, ddv)


def epe(est: FlowField, ref: FlowField) -> float:
    """Mean end-point error between two fields."""
    return float(epe_map(est, ref).mean())


def mean_magnitude(field: FlowField) -> float:
    """Mean per-pixel flow magnitude in pixels."""
    return float(field.magnitude().mean())


def flow_to_color(field: FlowField, max_mag: float | None = None) -> np.ndarray:
    """Standard color-wheel rendering: hue from direction, saturation from
    magnitude (normalised by ``max_mag``, default the 99th percentile).
    Zero flow renders white."""
    mag = field.magnitude()
    if max_mag is None:
        max_mag = float(np.percentile(mag, 99.0))
    angle = np.arctan2(field.dv, field.du)
    hue = (angle + np.pi) / (2.0 * np.pi)
    sat = np.clip(mag / max_mag, 0.0, 1.0) if max_mag > 0 else np.zeros_like(mag)
    return _hsv_to_rgb(hue, sat, np.ones_like(hue))


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    h6 = np.mod(h, 1.0) * 6.0
    sector = np.floor(h6).astype(np.int64) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    choices = [
        np.stack([v, t, p], axis=-1),
        np.stack([q, v, p], axis=-1),
        np.stack([p, v, t], axis=-1),
        np.stack([p, q, v], axis=-1),
        np.stack([t, p, v], axis=-1),
        np.stack([v, p, q], axis=-1),
    ]
    out = np.empty(h.shape + (3,), dtype=np.float64)
    for k, arr in enumerate(choices):
        out[sector == k] = arr[sector == k]
    return out
