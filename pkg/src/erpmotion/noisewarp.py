"""Gaussian-preserving noise warping with spherical boundary wrapping.

Noise is advected by scatter: every source pixel contributes its value to
the flow target rounded to the nearest pixel and folded back into the
raster by the ERP boundary remap (columns wrap; rows reflect across the
pole edges with a half-width longitude shift).  Targets hit by k sources
store ``sum / sqrt(k)``, which keeps every marginal exactly standard
normal; empty targets are refilled with fresh counter-keyed noise, never
copied from neighbours, so distinct pixels stay independent.  Because the
scatter is a permutation for bijective integer flows, integer shifts and
integer-column yaws move noise around bit-exactly.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass

from .errors import ConfigError, FormatError, ShapeError
from .flow import FlowField
from .geometry import _fold_indices
from .image_io import load_erpf_with_extra, save_erpf
from .rng import derive_seed, normals_at


@dataclass(frozen=True)
class NoiseGrid:
    """Noise raster plus per-pixel contribution counts from the last warp.

    ``counts`` is 1 everywhere for freshly sampled grids; after a warp it
    records how many sources landed on each pixel (0 marks hole-filled
    fresh noise, letting consumers tell advected from fresh values).
    """

    values: np.ndarray  # (H, W, C) float64
    counts: np.ndarray  # (H, W) int64

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if values.ndim != 3:
            raise ShapeError(f"noise values must be (H, W, C), got {values.shape}")
        if counts.shape != values.shape[:2]:
            raise ShapeError(f"counts shape {counts.shape} does not match values {values.shape[:2]}")
        if not np.isfinite(values).all():
            raise ShapeError("noise contains non-finite values")
        if (counts < 0).any():
            raise ShapeError("counts must be non-negative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "counts", counts)

    @property
    def shape(self):
        return self.values.shape


def sample_noise(h: int, w: int, c: int, seed: int) -> NoiseGrid:
    """Fresh i.i.d. standard normal grid from the counter-based generator."""
    if h <= 0 or w <= 0 or c <= 0:
        raise ConfigError(f"noise dimensions must be positive, got {h}x{w}x{c}")
    values = normals_at(seed, np.arange(h * w * c, dtype=np.uint64)).reshape(h, w, c)
    return NoiseGrid(values, np.ones((h, w), dtype=np.int64))


def remap_pixel(i: int, j: int, h: int, w: int):
    """Boundary remap of an integer pixel onto the raster.

    In-range rows keep ``j mod W``; rows past an edge reflect about that
    edge row (``-i`` at the top, ``2(H-1) - i`` at the bottom) and shift the
    column by ``W/2``.  The reflection is applied repeatedly if one pass is
    not enough (|i| up to just under 2H); beyond that the overshoot is
    rejected.
    """
    if abs(i) >= 2 * h:
        raise ConfigError(f"row overshoot {i} beyond one reflection for H={h}")
    fi, fj = _fold_indices(np.asarray([i]), np.asarray([j]), h, w)
    return int(fi[0]), int(fj[0])


def warp_noise(grid: NoiseGrid, fwd: FlowField, seed: int) -> NoiseGrid:
    """Advect a noise grid one step along a forward flow.

    Scatter-normalise-fill: targets are ``remap(round(p + flow))``; a target
    hit k>=1 times becomes ``sum/sqrt(k)``; untouched targets get fresh
    standard normal keyed by ``(seed, pixel, channel)``.  Contributions are
    reduced in source row-major order, so the result is bit-reproducible
    under any parallel schedule.
    """
    h, w, c = grid.shape
    if fwd.shape != (h, w):
        raise ShapeError(f"flow shape {fwd.shape} does not match noise {h}x{w}")
    if not (np.isfinite(fwd.du).all() and np.isfinite(fwd.dv).all()):
        raise ShapeError("flow contains non-finite values")
    ii, jj = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    ti = np.rint(ii + fwd.dv).astype(np.int64)
    tj = np.rint(jj + fwd.du).astype(np.int64)
    fi, fj = _fold_indices(ti, tj, h, w)
    flat = (fi * w + fj).ravel()

    counts = np.bincount(flat, minlength=h * w)
    values = np.empty((h * w, c), dtype=np.float64)
    for ch in range(c):
        values[:, ch] = np.bincount(flat, weights=grid.values[..., ch].ravel(), minlength=h * w)
    hit = counts > 0
    values[hit] /= np.sqrt(counts[hit])[:, None]
    holes = np.flatnonzero(~hit)
    if holes.size:
        ctr = (holes[:, None] * c + np.arange(c)[None, :]).astype(np.uint64)
        values[holes] = normals_at(seed, ctr)
    return NoiseGrid(values.reshape(h, w, c), counts.reshape(h, w).astype(np.int64))


def warp_chain(q0: NoiseGrid, flows, seed: int):
    """Iterate :func:`warp_noise` along a flow sequence.

    Returns all ``len(flows) + 1`` grids including the input; the per-step
    hole-fill seed derives from ``(seed, step index)`` so chains are
    reproducible and independent of evaluation order.
    """
    grids = [q0]
    for t, flow in enumerate(flows):
        try:
            grids.append(warp_noise(grids[-1], flow, derive_seed(seed, f"warp:{t}")))
        except (ShapeError, ConfigError) as exc:
            raise type(exc)(f"warp step {t}: {exc}") from exc
    return grids


def degrade(grid: NoiseGrid, gamma: float, seed: int) -> NoiseGrid:
    """Variance-preserving blend with fresh noise:
    ``q' = sqrt(1-gamma) q + sqrt(gamma) eps``.

    ``gamma=0`` returns the grid unchanged, ``gamma=1`` pure fresh noise;
    counts pass through untouched (degradation is not an advection step).
    """
    if not (np.isfinite(gamma) and 0.0 <= gamma <= 1.0):
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    if gamma == 0.0:
        return NoiseGrid(grid.values.copy(), grid.counts.copy())
    h, w, c = grid.shape
    eps = normals_at(seed, np.arange(h * w * c, dtype=np.uint64)).reshape(h, w, c)
    if gamma == 1.0:
        return NoiseGrid(eps, grid.counts.copy())
    values = np.sqrt(1.0 - gamma) * grid.values + np.sqrt(gamma) * eps
    return NoiseGrid(values, grid.counts.copy())


def roll_longitude(grid: np.ndarray, theta: float, width: int | None = None):
    """Cyclic column shift by ``theta / 360 * W`` (which must be an integer).

    Returns ``(rolled, shift)``; positive angles move content rightward,
    matching a yaw of the same angle.  Non-integer shifts are a
    configuration error, never silently rounded.
    """
    grid = np.asarray(grid)
    if grid.ndim < 2:
        raise ShapeError(f"expected at least 2-D raster, got {grid.shape}")
    w = grid.shape[1] if width is None else width
    if w != grid.shape[1]:
        raise ShapeError(f"width {w} does not match raster width {grid.shape[1]}")
    shift_f = theta * w / 360.0
    shift = int(np.rint(shift_f))
    if abs(shift_f - shift) > 1e-9:
        raise ConfigError(f"theta={theta} deg on W={w} gives non-integer shift {shift_f}")
    return np.roll(grid, shift, axis=1), shift


def unroll(grid: np.ndarray, accumulated_shift: int) -> np.ndarray:
    """Undo an accumulated longitude roll (bit-exact inverse)."""
    grid = np.asarray(grid)
    if grid.ndim < 2:
        raise ShapeError(f"expected at least 2-D raster, got {grid.shape}")
    return np.roll(grid, -int(accumulated_shift), axis=1)


def save_noise(grid: NoiseGrid, path) -> None:
    """Write values as an ERPF dump with a trailing u16 counts plane."""
    counts = np.minimum(grid.counts, 0xFFFF).astype("<u2")
    save_erpf(grid.values, path, extra=counts.tobytes())


def load_noise(path) -> NoiseGrid:
    values, extra = load_erpf_with_extra(path)
    h, w = values.shape[:2]
    if len(extra) != 2 * h * w:
        raise FormatError(f"{path}: missing or truncated counts plane")
    counts = np.frombuffer(extra, dtype="<u2").reshape(h, w).astype(np.int64)
    return NoiseGrid(values, counts)
