"""Analytic test-scene generator: procedural spherical textures rendered
under known camera rotations, optionally with a rigidly moving textured
disc, plus exact ground-truth flow fields.

Textures are functions of the viewing direction, never stored rasters, so
rendering a rotated camera is exact by construction: frame t evaluates the
texture at ``R_t^T x(p)``.  That zero-interpolation property is what lets
panorama rotation, rotation estimation, and flow estimation be tested
against tight tolerances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .flow import FlowField, wrap_columns
from .geometry import _dir_grid, dir_to_pixel, rotation_from_euler
from .motion import RotationTrack
from .rng import uniforms_at

TEXTURES = ("latlong-grad", "checker", "blobs")


@dataclass(frozen=True)
class DiscSpec:
    """A rigid textured disc gliding along a circle about ``axis``.

    ``center`` is the frame-0 world direction of the disc centre,
    ``radius_deg`` its angular radius, ``omega_deg`` the per-frame angular
    velocity about ``axis`` (a great circle when ``axis`` is orthogonal to
    ``center``)."""

    center: tuple = (0.0, 0.0, 1.0)
    radius_deg: float = 15.0
    omega_deg: float = 2.0
    color: tuple = (0.9, 0.3, 0.2)
    axis: tuple = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.radius_deg < 90.0:
            raise ConfigError(f"disc radius must be in (0, 90) degrees, got {self.radius_deg}")
        c = np.asarray(self.center, dtype=np.float64)
        a = np.asarray(self.axis, dtype=np.float64)
        if c.shape != (3,) or a.shape != (3,):
            raise ConfigError("disc center and axis must be 3-vectors")
        if not (np.linalg.norm(c) > 0 and np.linalg.norm(a) > 0):
            raise ConfigError("disc center and axis must be nonzero")


@dataclass(frozen=True)
class SceneSpec:
    """Procedural scene: raster size, frame count, texture, camera, disc."""

    h: int
    w: int
    frames: int
    seed: int = 0
    texture: str = "blobs"
    checker_n: int = 8
    blob_count: int = 60
    blob_sigma: float = 0.15
    euler_schedule: tuple | None = None  # per-frame (yaw, pitch, roll) deg, frame 0 zero
    camera: RotationTrack | None = None
    disc: DiscSpec | None = None

    def __post_init__(self):
        if self.w != 2 * self.h:
            raise ShapeError(f"ERP aspect requires W == 2H, got {self.h}x{self.w}")
        if self.frames < 1:
            raise ConfigError(f"frame count must be >= 1, got {self.frames}")
        if self.texture not in TEXTURES:
            raise ConfigError(f"unknown texture {self.texture!r}, expected one of {TEXTURES}")
        if self.euler_schedule is not None and self.camera is not None:
            raise ConfigError("give either an Euler schedule or a RotationTrack, not both")

    def track(self) -> RotationTrack:
        if self.camera is not None:
            if len(self.camera) != self.frames:
                raise ConfigError(f"camera track has {len(self.camera)} entries for {self.frames} frames")
            return self.camera
        if self.euler_schedule is None:
            return RotationTrack.identity(self.frames)
        sched = list(self.euler_schedule)
        if len(sched) != self.frames:
            raise ConfigError(f"Euler schedule has {len(sched)} entries for {self.frames} frames")
        if tuple(sched[0]) != (0.0, 0.0, 0.0) and tuple(sched[0]) != (0, 0, 0):
            raise ConfigError("Euler schedule must start at (0, 0, 0)")
        return RotationTrack(np.stack([rotation_from_euler(*e) for e in sched]))


def _axis_rotation(axis: np.ndarray, degrees: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    a = np.deg2rad(degrees)
    c, s = np.cos(a), np.sin(a)
    x, y, z = axis
    k = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])
    return c * np.eye(3) + s * k + (1 - c) * np.outer(axis, axis)


def _blob_params(spec: SceneSpec):
    n = spec.blob_count
    u = uniforms_at(spec.seed, np.arange(6 * n, dtype=np.uint64)).reshape(n, 6)
    # Uniform directions from inverse-CDF sampling of the sphere.
    z = 2.0 * u[:, 0] - 1.0
    phi = 2.0 * np.pi * u[:, 1]
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    centers = np.stack([r * np.cos(phi), z, r * np.sin(phi)], axis=1)
    colors = 0.2 + 0.8 * u[:, 2:5]
    sigmas = spec.blob_sigma * (0.6 + 0.8 * u[:, 5])
    return centers, colors, sigmas


_WAVE_CYCLES = np.array([0.75, 1.1, 1.5, 2.0, 2.8, 4.0])
_WAVE_AMPS = np.array([0.06, 0.06, 0.05, 0.05, 0.04, 0.04])


def _wave_params(spec: SceneSpec):
    """Band-limited plane-wave base so the blob texture has gradient
    everywhere (flat regions starve block matching).  Frequencies scale
    with 1/blob_sigma so one knob trades detail against raster size; the
    phase is shared across channels to keep contrast in the luma plane."""
    n = len(_WAVE_CYCLES)
    u = uniforms_at(spec.seed ^ 0x5EED, np.arange(4 * n, dtype=np.uint64)).reshape(n, 4)
    z = 2.0 * u[:, 0] - 1.0
    phi = 2.0 * np.pi * u[:, 1]
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    axes = np.stack([r * np.cos(phi), z, r * np.sin(phi)], axis=1)
    freqs = (_WAVE_CYCLES / max(spec.blob_sigma, 1e-3)) * (0.9 + 0.2 * u[:, 2])
    phases = 2.0 * np.pi * u[:, 3]
    return axes, freqs, phases


def _texture(spec: SceneSpec, dirs: np.ndarray) -> np.ndarray:
    """Evaluate the scene texture at world directions ``dirs`` (..., 3)."""
    if spec.texture == "latlong-grad":
        return 0.5 * (dirs + 1.0)
    if spec.texture == "checker":
        lam = np.arctan2(dirs[..., 0], dirs[..., 2])
        phi = np.arcsin(np.clip(dirs[..., 1], -1.0, 1.0))
        u = np.floor((lam + np.pi) / (2.0 * np.pi) * 2 * spec.checker_n).astype(np.int64)
        v = np.floor((np.pi / 2.0 - phi) / np.pi * spec.checker_n).astype(np.int64)
        val = np.where((u + v) % 2 == 0, 0.2, 0.8)
        return np.repeat(val[..., None], 3, axis=-1)
    centers, colors, sigmas = _blob_params(spec)
    axes, freqs, phases = _wave_params(spec)
    base = 0.5 + 0.05 * dirs
    for ax, fr, ph, amp in zip(axes, freqs, phases, _WAVE_AMPS):
        base = base + amp * np.sin(fr * (dirs @ ax) + ph)[..., None]
    acc = np.zeros(dirs.shape[:-1] + (3,))
    for c, col, s in zip(centers, colors, sigmas):
        g = np.exp((dirs @ c - 1.0) / (s * s))
        acc += g[..., None] * col
    return np.clip(base + 0.3 * acc, 0.0, 1.0)


def _disc_pattern(spec: SceneSpec, body_dirs: np.ndarray) -> np.ndarray:
    """Texture attached to the disc body so its interior carries trackable
    detail; evaluated on body-frame directions."""
    disc = spec.disc
    axis = np.asarray(disc.axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(axis, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    mod = 0.55 + 0.25 * np.sin(24.0 * (body_dirs @ e1)) + 0.2 * np.cos(19.0 * (body_dirs @ e2))
    return mod[..., None] * np.asarray(disc.color, dtype=np.float64)


def _disc_center(spec: SceneSpec, t: int) -> np.ndarray:
    c0 = np.asarray(spec.disc.center, dtype=np.float64)
    c0 = c0 / np.linalg.norm(c0)
    return _axis_rotation(spec.disc.axis, spec.disc.omega_deg * t) @ c0


def render(spec: SceneSpec):
    """Render all frames; pixel p of frame t shows ``texture(R_t^T x(p))``."""
    track = spec.track()
    dirs = _dir_grid(spec.h, spec.w)
    cos_r = np.cos(np.deg2rad(spec.disc.radius_deg)) if spec.disc else None
    frames = []
    for t in range(spec.frames):
        world = dirs @ track[t]  # R_t^T x per pixel
        img = _texture(spec, world)
        if spec.disc is not None:
            ct = _disc_center(spec, t)
            mask = world @ ct > cos_r
            if mask.any():
                body = world[mask] @ _axis_rotation(spec.disc.axis, spec.disc.omega_deg * t)  # A_t^T w
                img[mask] = np.clip(_disc_pattern(spec, body), 0.0, 1.0)
        frames.append(img)
    return frames


def gt_flows(spec: SceneSpec):
    """Exact forward flow for each consecutive frame pair.

    Background pixels follow the camera direction map ``x' = R_{t+1} R_t^T
    x``; pixels showing the disc in frame t are overridden by the disc's
    rigid advection about its axis, re-projected into frame t+1.
    """
    track = spec.track()
    h, w = spec.h, spec.w
    dirs = _dir_grid(h, w)
    ii, jj = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    cos_r = np.cos(np.deg2rad(spec.disc.radius_deg)) if spec.disc else None
    step = _axis_rotation(spec.disc.axis, spec.disc.omega_deg) if spec.disc else None
    flows = []
    for t in range(spec.frames - 1):
        m = track[t + 1] @ track[t].T  # frame-t direction -> frame-(t+1) direction
        target = dirs @ m.T
        if spec.disc is not None:
            world = dirs @ track[t]
            mask = world @ _disc_center(spec, t) > cos_r
            if mask.any():
                advected = world[mask] @ step.T
                target[mask] = advected @ track[t + 1].T  # rows of R_{t+1} w'
        ti, tj = dir_to_pixel(target, h, w, check=False)
        flows.append(FlowField(wrap_columns(tj - jj, w), ti - ii))
    return flows


def spec_to_json(spec: SceneSpec) -> str:
    if spec.camera is not None:
        raise ConfigError("JSON scene specs carry an Euler schedule, not a matrix track")
    payload = {
        "h": spec.h,
        "w": spec.w,
        "frames": spec.frames,
        "seed": spec.seed,
        "texture": spec.texture,
        "checker_n": spec.checker_n,
        "blob_count": spec.blob_count,
        "blob_sigma": spec.blob_sigma,
        "euler_schedule": [list(map(float, e)) for e in spec.euler_schedule] if spec.euler_schedule else None,
        "disc": None
        if spec.disc is None
        else {
            "center": list(map(float, spec.disc.center)),
            "radius_deg": spec.disc.radius_deg,
            "omega_deg": spec.disc.omega_deg,
            "color": list(map(float, spec.disc.color)),
            "axis": list(map(float, spec.disc.axis)),
        },
    }
    return json.dumps(payload, indent=2)


def spec_from_json(text: str) -> SceneSpec:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad scene spec JSON: {exc}") from exc
    known = {"h", "w", "frames", "seed", "texture", "checker_n", "blob_count", "blob_sigma", "euler_schedule", "disc"}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown scene spec keys: {sorted(unknown)}")
    disc = payload.get("disc")
    sched = payload.get("euler_schedule")
    return SceneSpec(
        h=int(payload["h"]),
        w=int(payload["w"]),
        frames=int(payload["frames"]),
        seed=int(payload.get("seed", 0)),
        texture=payload.get("texture", "blobs"),
        checker_n=int(payload.get("checker_n", 8)),
        blob_count=int(payload.get("blob_count", 60)),
        blob_sigma=float(payload.get("blob_sigma", 0.15)),
        euler_schedule=tuple(tuple(float(v) for v in e) for e in sched) if sched else None,
        disc=None
        if disc is None
        else DiscSpec(
            center=tuple(disc.get("center", (0.0, 0.0, 1.0))),
            radius_deg=float(disc.get("radius_deg", 15.0)),
            omega_deg=float(disc.get("omega_deg", 2.0)),
            color=tuple(disc.get("color", (0.9, 0.3, 0.2))),
            axis=tuple(disc.get("axis", (0.0, 1.0, 0.0))),
        ),
    )
