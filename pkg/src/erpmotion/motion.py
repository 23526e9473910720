"""Camera-rotation / residual-motion decoupling for ERP video.

Rotation flow is the scene-independent flow induced by a camera rotation:
``f_r(p) = R^T x(p) - x(p)`` on the unit sphere.  Subtracting it from an
observed flow leaves the derotated flow (translation and object motion).
The rotation between two frames is recovered from flow correspondences by a
weighted orthogonal Procrustes (Wahba) fit with Huber-reweighted rounds to
shrug off object-motion outliers; per-pair deltas accumulate into a track
relative to frame 0.

Composition conventions (pinned by the ``rotate_erp`` composition law and
the round-trip tests): a per-pair delta ``D_t`` is the rotation with
``frame[t+1] ~ rotate_erp(frame[t], D_t)``, tracks accumulate by left
multiplication ``R_{t+1} = D_t @ R_t``, and ``estimate_rotation`` returns
the matrix whose rotation flow matches the observed flow, i.e.
``D_t = estimate_rotation(flow_t).T``.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

from .blockmatch import FlowParams, estimate_flow
from .errors import ConfigError, EstimationError, ShapeError
from .flow import FlowField, SphericalFlow, wrap_columns
from .geometry import (
    _dir_grid,
    check_rotation,
    dir_to_pixel,
    pixel_to_dir,
    polar_orthonormalize,
    rotate_erp,
)


@dataclass(frozen=True)
class RotationTrack:
    """Per-frame rotations relative to frame 0; ``rotations[0]`` is identity."""

    rotations: np.ndarray  # (T, 3, 3)

    def __post_init__(self):
        rots = np.asarray(self.rotations, dtype=np.float64)
        if rots.ndim != 3 or rots.shape[1:] != (3, 3) or rots.shape[0] < 1:
            raise ShapeError(f"track must be (T, 3, 3), got {rots.shape}")
        if not np.array_equal(rots[0], np.eye(3)):
            raise ConfigError("track must start at the exact identity")
        for t in range(rots.shape[0]):
            check_rotation(rots[t], tol=1e-8)
        object.__setattr__(self, "rotations", rots)

    def __len__(self) -> int:
        return self.rotations.shape[0]

    def __getitem__(self, t: int) -> np.ndarray:
        return self.rotations[t]

    @classmethod
    def identity(cls, frames: int) -> "RotationTrack":
        return cls(np.broadcast_to(np.eye(3), (frames, 3, 3)).copy())


@dataclass(frozen=True)
class RotationEstParams:
    """Sampling stride, robust-refit rounds, and the Huber scale multiplier
    applied to the median residual."""

    stride: int = 4
    irls_rounds: int = 3
    huber_scale: float = 2.0


def rotation_flow(rotation: np.ndarray, h: int, w: int):
    """Analytic flow of a camera rotation: returns (spherical, pixel) fields.

    Spherical: ``f_r(p) = R^T x(p) - x(p)``.  Pixel displacements come from
    re-projecting the rotated direction, with the column difference wrapped
    to the shortest arc.  A yaw about the polar axis yields a uniform
    horizontal field of exactly ``alpha / 360 * W`` pixels.
    """
    if w != 2 * h:
        raise ShapeError(f"ERP aspect requires W == 2H, got H={h}, W={w}")
    rotation = check_rotation(rotation)
    x = _dir_grid(h, w)
    rx = x @ rotation  # R^T x per pixel
    ti, tj = dir_to_pixel(rx, h, w, check=False)
    ii, jj = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return SphericalFlow(rx - x), FlowField(wrap_columns(tj - jj, w), ti - ii)


def decompose_flow(flow: SphericalFlow, rotation: np.ndarray) -> SphericalFlow:
    """Derotate a spherical flow: ``f_d = f - f_r(R)`` (exact subtraction)."""
    sph_r, _ = rotation_flow(rotation, flow.h, flow.w)
    return SphericalFlow(flow.vec - sph_r.vec)


def estimate_rotation(flow: FlowField, params: RotationEstParams = RotationEstParams()) -> np.ndarray:
    """Least-squares camera rotation explaining a pixel flow field.

    Builds direction correspondences ``x_i -> y_i = dir(p_i + flow_i)`` on a
    subsampled grid with cos-latitude area weights and solves
    ``min_R sum w_i ||R^T x_i - y_i||^2`` in closed form via the SVD of
    ``B = sum w_i x_i y_i^T``, followed by Huber-reweighted refits
    (delta = ``huber_scale`` times the median residual) to downweight
    object-motion outliers.
    """
    h, w = flow.shape
    if w != 2 * h:
        raise ShapeError(f"ERP aspect requires W == 2H, got {h}x{w}")
    s = max(1, params.stride)
    ii, jj = np.meshgrid(np.arange(0, h, s, dtype=np.float64), np.arange(0, w, s, dtype=np.float64), indexing="ij")
    du = flow.du[::s, ::s]
    dv = flow.dv[::s, ::s]
    x = pixel_to_dir(ii, jj, h, w).reshape(-1, 3)
    y = pixel_to_dir(ii + dv, jj + du, h, w).reshape(-1, 3)
    lat = np.pi / 2.0 - ((ii.ravel() + 0.5) / h) * np.pi
    base_w = np.cos(lat)
    if x.shape[0] < 3:
        raise EstimationError(f"need at least 3 correspondences, got {x.shape[0]}")

    def solve(weights: np.ndarray) -> np.ndarray:
        b = np.einsum("n,ni,nj->ij", weights, x, y)
        u, sv, vt = np.linalg.svd(b)
        if sv[1] <= 1e-12 * max(sv[0], 1e-300):
            raise EstimationError("rank-deficient correspondence matrix")
        d = np.diag([1.0, 1.0, np.sign(np.linalg.det(u) * np.linalg.det(vt))])
        return u @ d @ vt

    rot = solve(base_w)
    for _ in range(params.irls_rounds):
        resid = np.linalg.norm(x @ rot - y, axis=1)
        delta = params.huber_scale * float(np.median(resid))
        if delta <= 1e-15:
            break
        huber = np.where(resid <= delta, 1.0, delta / np.maximum(resid, 1e-300))
        rot = solve(base_w * huber)
    return polar_orthonormalize(rot)


def accumulate(deltas) -> RotationTrack:
    """Fold frame-to-frame deltas into a track relative to frame 0.

    Each delta is the rotation taking frame t to frame t+1 in the
    ``rotate_erp`` sense, so the track composes by left multiplication;
    every step is re-projected onto SO(3) by polar orthonormalisation to
    keep long chains from drifting off the manifold.
    """
    rots = [np.eye(3)]
    for k, delta in enumerate(deltas):
        delta = np.asarray(delta, dtype=np.float64)
        try:
            check_rotation(delta, tol=1e-6)
        except ConfigError as exc:
            raise ConfigError(f"delta {k} is not a rotation: {exc}") from exc
        rots.append(polar_orthonormalize(delta @ rots[-1]))
    return RotationTrack(np.stack(rots) if len(rots) > 1 else np.eye(3)[None])


def derotate_frames(frames, track: RotationTrack):
    """Undo the camera rotation: frame t -> ``rotate_erp(I_t, R_t^-1)``."""
    if len(frames) != len(track):
        raise ShapeError(f"{len(frames)} frames vs {len(track)} track entries")
    return [rotate_erp(f, track[t].T) for t, f in enumerate(frames)]


def rerotate_frames(frames, track: RotationTrack):
    """Re-apply the camera rotation: frame t -> ``rotate_erp(I_t, R_t)``."""
    if len(frames) != len(track):
        raise ShapeError(f"{len(frames)} frames vs {len(track)} track entries")
    return [rotate_erp(f, track[t]) for t, f in enumerate(frames)]


@dataclass(frozen=True)
class DecoupleResult:
    derotated: list
    track: RotationTrack
    derotated_flows: list = field(default_factory=list)


def decouple_pipeline(
    frames,
    flow_params: FlowParams = FlowParams(),
    rot_params: RotationEstParams = RotationEstParams(),
    jobs: int = 1,
    refine: bool = True,
) -> DecoupleResult:
    """Full decoupling: pair flows -> rotations -> track -> derotated video.

    Estimates flow per consecutive pair, fits the pair rotation, accumulates
    the track, derotates every frame and re-estimates flow on the derotated
    frames (the conditioning signal downstream consumers want).

    With ``refine`` on, per-pair drift is removed by a second pass that
    measures each derotated frame's residual rotation against frame 0 on a
    shallow pyramid (residuals are small once the first pass has run) and
    folds the correction into the track.  Estimator failures are re-raised
    with the offending frame-pair index.
    """
    if len(frames) < 2:
        raise ShapeError("need at least 2 frames to decouple")

    def make_pair_flow(params):
        def pair_flow(pair):
            t, (fa, fb) = pair
            try:
                return estimate_flow(fa, fb, params)
            except Exception as exc:
                raise EstimationError(f"flow estimation failed for frame pair {t}->{t + 1}: {exc}") from exc

        return pair_flow

    pairs = list(enumerate(zip(frames[:-1], frames[1:])))
    flows = _ordered_map(make_pair_flow(flow_params), pairs, jobs)

    deltas = []
    for t, fl in enumerate(flows):
        try:
            deltas.append(estimate_rotation(fl, rot_params).T)
        except EstimationError as exc:
            raise EstimationError(f"rotation estimation failed for frame pair {t}->{t + 1}: {exc}") from exc
    track = accumulate(deltas)

    fine_params = FlowParams(levels=2, search_radius=flow_params.search_radius, block_size=flow_params.block_size)
    if refine:
        derotated = derotate_frames(frames, track)
        anchors = list(enumerate(zip([derotated[0]] * (len(frames) - 1), derotated[1:])))
        anchor_flows = _ordered_map(make_pair_flow(fine_params), anchors, jobs)
        rots = track.rotations.copy()
        for t, fl in enumerate(anchor_flows, start=1):
            try:
                residual = estimate_rotation(fl, rot_params)
            except EstimationError as exc:
                raise EstimationError(f"track refinement failed at frame {t}: {exc}") from exc
            rots[t] = polar_orthonormalize(rots[t] @ residual.T)
        track = RotationTrack(rots)

    derotated = derotate_frames(frames, track)
    dpairs = list(enumerate(zip(derotated[:-1], derotated[1:])))
    dflows = _ordered_map(make_pair_flow(fine_params), dpairs, jobs)
    return DecoupleResult(derotated=derotated, track=track, derotated_flows=dflows)


def _ordered_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def save_track(track: RotationTrack, path, height: int, width: int) -> None:
    """Serialise a track as JSON: unit quaternions [w, x, y, z] plus dims."""
    quats = _ScipyRotation.from_matrix(track.rotations).as_quat(scalar_first=True)
    payload = {
        "height": int(height),
        "width": int(width),
        "frames": len(track),
        "quaternions": [[float(v) for v in q] for q in quats],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def load_track(path):
    """Read a track JSON; returns ``(RotationTrack, height, width)``.

    Quaternions are re-orthonormalised on load (unit-norm checked to 1e-9,
    matrices re-projected by polar orthonormalisation, frame 0 snapped to
    the exact identity it must be)."""
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    quats = np.asarray(payload["quaternions"], dtype=np.float64)
    if quats.ndim != 2 or quats.shape[1] != 4:
        raise ConfigError(f"{path}: quaternions must be (T, 4)")
    if int(payload.get("frames", quats.shape[0])) != quats.shape[0]:
        raise ConfigError(f"{path}: frame count does not match quaternion list")
    norms = np.linalg.norm(quats, axis=1)
    if not np.allclose(norms, 1.0, rtol=0.0, atol=1e-9):
        raise ConfigError(f"{path}: quaternions must be unit-norm within 1e-9")
    mats = _ScipyRotation.from_quat(quats, scalar_first=True).as_matrix()
    mats = np.stack([polar_orthonormalize(m) for m in mats])
    if np.abs(mats[0] - np.eye(3)).max() > 1e-6:
        raise ConfigError(f"{path}: track must start at the identity rotation")
    mats[0] = np.eye(3)
    return RotationTrack(mats), int(payload["height"]), int(payload["width"])
