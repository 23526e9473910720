"""Self-contained coarse-to-fine block-matching flow estimator.

The estimator is deliberately simple: a box-downsampled pyramid, per-level
integer SSD search over a small radius around the upsampled coarse flow
(with horizontal wrap in candidate lookup), parabolic sub-pixel refinement
of the SSD surface, and bilinear upsampling from block centres to a dense
field.  It trades peak accuracy for determinism and wrap-awareness;
externally produced .flo files remain first-class inputs for workflows that
need a stronger estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import ShapeError
from .flow import FlowField
from .imageops import resize_bilinear, to_gray


@dataclass(frozen=True)
class FlowParams:
    """Estimator knobs: pyramid depth, per-level search radius, block size.

    ``levels=None`` selects ``ceil(log2(min(H, W) / 16))`` so the coarsest
    level has a minimum dimension of roughly 16 pixels.
    """

    levels: int | None = None
    search_radius: int = 4
    block_size: int = 8


def default_levels(h: int, w: int) -> int:
    return max(1, math.ceil(math.log2(min(h, w) / 16)))


def _downsample2(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    h -= h % 2
    w -= w % 2
    v = img[:h, :w]
    return 0.25 * (v[0::2, 0::2] + v[1::2, 0::2] + v[0::2, 1::2] + v[1::2, 1::2])


def _warp_integer(img: np.ndarray, du_int: np.ndarray, dv_int: np.ndarray) -> np.ndarray:
    """Gather ``img`` at ``p + (dv, du)`` for integer flows: columns wrap,
    rows clamp.  A pure permutation-style gather keeps the warped frame as
    sharp as the reference, so sub-pixel refinement stays unbiased."""
    h, w = img.shape
    ii, jj = np.meshgrid(np.arange(h, dtype=np.int64), np.arange(w, dtype=np.int64), indexing="ij")
    si = np.clip(ii + dv_int.astype(np.int64), 0, h - 1)
    sj = np.mod(jj + du_int.astype(np.int64), w)
    return img[si, sj]


def _shift_costs(a: np.ndarray, b: np.ndarray, offsets, block: int, ci, cj) -> np.ndarray:
    """SSD block cost of matching ``a`` against ``b`` shifted by each offset.

    Direct squared differences: costs are exactly non-negative and exactly
    zero for a perfect match, which the tie-break and sub-pixel guards rely
    on.  Row-shifted copies of ``b`` are shared across the dx sweep.
    """
    h = a.shape[0]
    rows = np.arange(h)
    dys = sorted({dy for dy, _ in offsets})
    b_rows = {dy: b[np.clip(rows + dy, 0, h - 1)] for dy in dys}
    sel = np.ix_(ci, cj)
    costs = np.empty((len(offsets), len(ci), len(cj)), dtype=np.float32)
    d = np.empty_like(a)
    for k, (dy, dx) in enumerate(offsets):
        np.subtract(a, np.roll(b_rows[dy], -dx, axis=1), out=d)
        np.multiply(d, d, out=d)
        costs[k] = uniform_filter(d, size=block, mode=["nearest", "wrap"])[sel]
    return costs


def _parabolic(c_minus: np.ndarray, c_zero: np.ndarray, c_plus: np.ndarray) -> np.ndarray:
    denom = c_minus - 2.0 * c_zero + c_plus
    num = 0.5 * (c_minus - c_plus)
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)
    delta = np.where(c_zero == 0.0, 0.0, delta)
    return np.clip(delta, -0.5, 0.5)


def estimate_flow(a: np.ndarray, b: np.ndarray, params: FlowParams = FlowParams()) -> FlowField:
    """Dense flow from frame ``a`` to frame ``b`` (``a(p) ~ b(p + flow)``)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"frame shapes differ: {a.shape} vs {b.shape}")
    ga = to_gray(a).astype(np.float32)
    gb = to_gray(b).astype(np.float32)
    h, w = ga.shape

    levels = params.levels if params.levels is not None else default_levels(h, w)
    # Keep the coarsest level at least one block wide.
    max_levels = max(1, int(math.log2(max(1, min(h, w) // params.block_size))) + 1)
    levels = int(np.clip(levels, 1, max_levels))

    pyr_a, pyr_b = [ga], [gb]
    for _ in range(levels - 1):
        pyr_a.append(_downsample2(pyr_a[-1]))
        pyr_b.append(_downsample2(pyr_b[-1]))

    r = params.search_radius
    offsets = [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
    offsets.sort(key=lambda o: (o[0] * o[0] + o[1] * o[1], o[0], o[1]))
    # Sorted position of each (dy, dx), for neighbour lookups in refinement.
    pos_table = np.empty((2 * r + 1, 2 * r + 1), dtype=np.int64)
    for k, (dy, dx) in enumerate(offsets):
        pos_table[dy + r, dx + r] = k

    du = dv = None
    for level in range(levels - 1, -1, -1):
        la, lb = pyr_a[level], pyr_b[level]
        lh, lw = la.shape
        if du is None:
            du = np.zeros((lh, lw))
            dv = np.zeros((lh, lw))
        else:
            du = resize_bilinear(du, lh, lw) * 2.0
            dv = resize_bilinear(dv, lh, lw) * 2.0

        block = min(params.block_size, lh, lw)
        # Warp with the rounded flow only; the residual search plus the
        # parabolic fit re-estimates the fraction at this level's scale.
        du = np.rint(du)
        dv = np.rint(dv)
        warped = _warp_integer(lb, du, dv)
        stride = max(1, block // 2)
        ci = np.arange(block // 2, lh, stride)
        cj = np.arange(block // 2, lw, stride)
        if ci.size == 0:
            ci = np.array([lh // 2])
        if cj.size == 0:
            cj = np.array([lw // 2])

        costs = _shift_costs(la, warped, offsets, block, ci, cj)
        best = np.argmin(costs, axis=0)  # first occurrence = smallest offset
        off_arr = np.array(offsets)
        dy0 = off_arr[best, 0]
        dx0 = off_arr[best, 1]

        bi, bj = np.meshgrid(np.arange(len(ci)), np.arange(len(cj)), indexing="ij")
        c0 = costs[best, bi, bj]

        def neighbor_cost(dy, dx, valid):
            vals = costs[pos_table[dy + r, dx + r], bi, bj]
            return np.where(valid, vals, c0)

        vx = (np.abs(dx0) < r)
        sub_x = np.where(
            vx,
            _parabolic(
                neighbor_cost(dy0, np.clip(dx0 - 1, -r, r), vx),
                c0,
                neighbor_cost(dy0, np.clip(dx0 + 1, -r, r), vx),
            ),
            0.0,
        )
        vy = (np.abs(dy0) < r)
        sub_y = np.where(
            vy,
            _parabolic(
                neighbor_cost(np.clip(dy0 - 1, -r, r), dx0, vy),
                c0,
                neighbor_cost(np.clip(dy0 + 1, -r, r), dx0, vy),
            ),
            0.0,
        )

        blk_du = du[np.ix_(ci, cj)] + dx0 + sub_x
        blk_dv = dv[np.ix_(ci, cj)] + dy0 + sub_y
        du = resize_bilinear(blk_du, lh, lw)
        dv = resize_bilinear(blk_dv, lh, lw)

    return FlowField(du, dv)
