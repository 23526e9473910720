"""Dataset curation pipeline: format checks, transition detection, motion
filtering, clip segmentation, and JSONL manifest persistence.

The pipeline operates on frame directories (one subdirectory of numbered
PNGs per video, with a ``meta.json`` sidecar ``{"fps": float, "id": str}``);
container decoding is out of scope.  Processing order per video: stereo and
fisheye format checks, transition detection, segmentation into 3-10 s
clips clear of trimmed transition windows, then per-clip motion scoring.
Unreadable inputs become per-item error records, never batch failures.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .blockmatch import FlowParams, estimate_flow
from .errors import ConfigError, ShapeError
from .flow import mean_magnitude
from .geometry import geodesic_distance
from .imageops import resize_min_dim, to_gray
from .image_io import load_png
from .metrics import ssim
from .motion import RotationEstParams, estimate_rotation

SIDECAR_NAME = "meta.json"

VERDICT_KEEP = "keep"
VERDICT_DISCARD = "discard"
REASONS = ("non-erp-stereo", "non-erp-fisheye", "low-motion", "too-short", "too-long", "ok")


@dataclass(frozen=True)
class CurationConfig:
    stereo_threshold: float = 0.7
    fisheye_threshold: float = 0.7
    black_level: float = 0.02
    motion_threshold: float = 2.0
    min_clip_s: float = 3.0
    max_clip_s: float = 10.0
    transition_trim_s: float = 1.0
    resize_min_dim: int = 256
    frames_sampled_per_check: int = 5
    transition_threshold: float = 0.15
    max_clips_per_video: int = 5
    min_rotation_dps: float | None = None

    def __post_init__(self):
        for name in (
            "stereo_threshold",
            "fisheye_threshold",
            "black_level",
            "motion_threshold",
            "min_clip_s",
            "max_clip_s",
            "transition_trim_s",
            "resize_min_dim",
            "frames_sampled_per_check",
            "transition_threshold",
            "max_clips_per_video",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.min_clip_s >= self.max_clip_s:
            raise ConfigError("min_clip_s must be below max_clip_s")


@dataclass(frozen=True)
class ClipRecord:
    """Curation verdict for one clip (or one whole rejected video)."""

    id: str
    start_frame: int
    end_frame: int
    fps: float
    scores: dict
    verdict: str
    reason: str

    def __post_init__(self):
        if self.start_frame >= self.end_frame:
            raise ConfigError(f"empty clip [{self.start_frame}, {self.end_frame})")
        if self.reason not in REASONS:
            raise ConfigError(f"unknown reason {self.reason!r}")


def sample_indices(count: int, n: int) -> np.ndarray:
    """Up to ``n`` evenly spaced frame indices."""
    if count <= n:
        return np.arange(count)
    return np.unique(np.round(np.linspace(0, count - 1, n)).astype(np.int64))


def stereo3d_score(frames) -> float:
    """Mean SSIM between left and right halves; near 1 flags side-by-side
    stereo footage."""
    if len(frames) < 1:
        raise ShapeError("stereo check needs at least one frame")
    vals = []
    for f in frames:
        f = np.asarray(f, dtype=np.float64)
        w = f.shape[1]
        if w % 2:
            raise ShapeError(f"stereo check needs an even width, got {w}")
        vals.append(ssim(f[:, : w // 2], f[:, w // 2:]))
    return float(np.mean(vals))


def fisheye_score(frames, black_level: float = 0.02) -> float:
    """Fraction of pixels outside the largest inscribed circle that are
    darker than ``black_level``; near 1 flags circular fisheye footage."""
    if len(frames) < 1:
        raise ShapeError("fisheye check needs at least one frame")
    vals = []
    for f in frames:
        g = to_gray(np.asarray(f, dtype=np.float64))
        h, w = g.shape
        ii, jj = np.meshgrid(np.arange(h) + 0.5, np.arange(w) + 0.5, indexing="ij")
        outside = (ii - h / 2.0) ** 2 + (jj - w / 2.0) ** 2 > (min(h, w) / 2.0) ** 2
        vals.append(float(np.mean(g[outside] < black_level)) if outside.any() else 0.0)
    return float(np.mean(vals))


def detect_transitions(frames, config: CurationConfig = CurationConfig()):
    """Indices where the mean absolute grayscale difference (at min-dim 64)
    jumps above the threshold; runs collapse to their first index."""
    if len(frames) < 2:
        raise ShapeError("transition detection needs at least two frames")
    small = [to_gray(resize_min_dim(np.asarray(f, dtype=np.float64), 64)) for f in frames]
    hits = []
    for t in range(1, len(small)):
        if float(np.mean(np.abs(small[t] - small[t - 1]))) > config.transition_threshold:
            hits.append(t)
    # Collapse runs of consecutive indices to their first frame.
    return [t for k, t in enumerate(hits) if k == 0 or t != hits[k - 1] + 1]


def motion_score(frames, config: CurationConfig = CurationConfig(), flow_params: FlowParams = FlowParams()) -> float:
    """Mean optical-flow magnitude (px/frame) after resizing to min-dim 256."""
    if len(frames) < 2:
        raise ShapeError("motion score needs at least two frames")
    resized = [resize_min_dim(np.asarray(f, dtype=np.float64), config.resize_min_dim) for f in frames]
    mags = [mean_magnitude(estimate_flow(a, b, flow_params)) for a, b in zip(resized[:-1], resized[1:])]
    return float(np.mean(mags))


def segment_clips(frame_count: int, fps: float, transitions, config: CurationConfig = CurationConfig()):
    """Cut at transitions, trim +-``transition_trim_s`` around each, then
    split the surviving spans greedily into clips of at most ``max_clip_s``
    seconds, dropping anything shorter than ``min_clip_s``."""
    if fps <= 0:
        raise ConfigError(f"fps must be positive, got {fps}")
    trim = int(round(config.transition_trim_s * fps))
    spans = []
    cursor = 0
    for t in sorted(transitions):
        lo, hi = t - trim, t + trim + 1
        if lo > cursor:
            spans.append((cursor, min(lo, frame_count)))
        cursor = max(cursor, hi)
    if cursor < frame_count:
        spans.append((cursor, frame_count))

    min_f = int(np.ceil(config.min_clip_s * fps))
    max_f = int(np.floor(config.max_clip_s * fps))
    clips = []
    for start, end in spans:
        pos = start
        while end - pos >= min_f:
            take = min(max_f, end - pos)
            clips.append((pos, pos + take))
            pos += take
    return clips


def _rotation_rate_dps(frames, fps: float) -> float | None:
    """Mean per-second camera rotation from pair flows; None off ERP aspect."""
    h, w = np.asarray(frames[0]).shape[:2]
    if w != 2 * h or len(frames) < 2:
        return None
    angles = []
    for a, b in zip(frames[:-1], frames[1:]):
        flow = estimate_flow(np.asarray(a), np.asarray(b))
        rot = estimate_rotation(flow, RotationEstParams())
        angles.append(geodesic_distance(rot, np.eye(3)))
    return float(np.mean(angles) * fps)


def curate_video(video_dir, config: CurationConfig = CurationConfig()):
    """Process one video directory into a list of record dicts."""
    video_dir = Path(video_dir)
    vid = video_dir.name
    try:
        sidecar = json.loads((video_dir / SIDECAR_NAME).read_text(encoding="utf-8"))
        fps = float(sidecar["fps"])
        vid = str(sidecar.get("id", vid))
        if fps <= 0:
            raise ConfigError(f"fps must be positive, got {fps}")
        frame_paths = sorted(video_dir.glob("*.png"))
        if not frame_paths:
            raise FileNotFoundError("no PNG frames")
        frames = [load_png(p) for p in frame_paths]
    except Exception as exc:
        return [{"id": vid, "error": f"{type(exc).__name__}: {exc}"}]

    count = len(frames)
    sampled = [frames[i] for i in sample_indices(count, config.frames_sampled_per_check)]
    stereo = stereo3d_score(sampled)
    fisheye = fisheye_score(sampled, config.black_level)

    def record(start, end, motion, transitions, verdict, reason):
        return asdict(
            ClipRecord(
                id=vid,
                start_frame=int(start),
                end_frame=int(end),
                fps=fps,
                scores={
                    "stereo3d": round(stereo, 9),
                    "fisheye": round(fisheye, 9),
                    "motion": None if motion is None else round(motion, 9),
                    "transitions": transitions,
                },
                verdict=verdict,
                reason=reason,
            )
        )

    if stereo > config.stereo_threshold:
        return [record(0, count, None, None, VERDICT_DISCARD, "non-erp-stereo")]
    if fisheye > config.fisheye_threshold:
        return [record(0, count, None, None, VERDICT_DISCARD, "non-erp-fisheye")]

    transitions = detect_transitions(frames, config) if count >= 2 else []
    clips = segment_clips(count, fps, transitions, config)
    if not clips:
        return [record(0, count, None, len(transitions), VERDICT_DISCARD, "too-short")]

    records = []
    kept = 0
    for start, end in clips:
        motion = motion_score(frames[start:end], config)
        if motion < config.motion_threshold:
            records.append(record(start, end, motion, len(transitions), VERDICT_DISCARD, "low-motion"))
            continue
        if config.min_rotation_dps is not None:
            rate = _rotation_rate_dps(frames[start:end], fps)
            if rate is not None and rate < config.min_rotation_dps:
                records.append(record(start, end, motion, len(transitions), VERDICT_DISCARD, "low-motion"))
                continue
        if kept < config.max_clips_per_video:
            records.append(record(start, end, motion, len(transitions), VERDICT_KEEP, "ok"))
            kept += 1
        # Kept clips beyond the per-video cap are dropped from the manifest.
    return records


def curate(corpus_dir, config: CurationConfig = CurationConfig(), jobs: int = 1):
    """Curate every video subdirectory; returns records sorted by video."""
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise ShapeError(f"corpus directory not found: {corpus_dir}")
    videos = sorted(p for p in corpus_dir.iterdir() if p.is_dir())
    if jobs > 1 and len(videos) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(lambda v: curate_video(v, config), videos))
    else:
        chunks = [curate_video(v, config) for v in videos]
    return [rec for chunk in chunks for rec in chunk]


def write_manifest(records, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec))
            f.write("\n")


def read_manifest(path):
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
