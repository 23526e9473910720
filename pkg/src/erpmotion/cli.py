"""Command-line entry point exposing the toolkit as subcommands.

One executable, uniform seeding and configuration: all randomness derives
from the single ``--seed`` via per-stage label hashing, so any rerun with
the same configuration is byte-identical in every output file regardless
of ``--jobs``.  ``--config`` supplies flat ``{"param": value}`` overrides
for the active subcommand; explicit flags win over the config file, which
wins over built-in defaults.  Unknown config keys are rejected.

Exit codes: 0 success, 1 usage/config error, 2 data or file-format error,
3 numeric estimation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blockmatch import FlowParams, estimate_flow
from .curation import CurationConfig, curate, write_manifest
from .errors import ConfigError, ErpMotionError, EstimationError, FormatError, ShapeError
from .flow import FlowField, epe, flow_to_color, read_flo, write_flo
from .geometry import rotation_from_euler
from .image_io import load_erpf, load_png, save_erpf, save_png
from .metrics import MetricReport, end_continuity, psnr, ssim, write_report
from .motion import RotationEstParams, decouple_pipeline, load_track, rerotate_frames, save_track
from .noisewarp import degrade, load_noise, roll_longitude, sample_noise, save_noise, unroll, warp_chain
from .rng import derive_seed, uniforms_at
from .synth import gt_flows, render, spec_from_json


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _opt(parser, flag, default, type_, help_, **kw):
    parser.add_argument(flag, default=None, type=type_, help=f"{help_} (default: {default})", **kw)
    dest = flag.lstrip("-").replace("-", "_")
    parser._param_defaults[dest] = default  # type: ignore[attr-defined]


def _new_sub(subparsers, name, help_):
    p = subparsers.add_parser(name, help=help_, description=help_)
    p._param_defaults = {}  # type: ignore[attr-defined]
    return p


def _resolve(args, name):
    """Apply precedence: explicit flag > config file > default."""
    explicit = getattr(args, name, None)
    if explicit is not None:
        return explicit
    if name in args._config:
        return args._config[name]
    return args._parser._param_defaults[name]  # type: ignore[attr-defined]


def build_parser() -> _Parser:
    parser = _Parser(prog="erpmotion", description="Spherical motion toolkit for equirectangular video.")
    parser.add_argument("--version", action="version", version=f"erpmotion {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p):
        p.add_argument("--config", default=None, help="JSON file of flat parameter overrides (default: none)")
        p.add_argument("--seed", default=None, type=int, help="top-level random seed (default: 0)")
        p.add_argument("--jobs", default=None, type=int, help="worker pool size (default: 1)")
        p._param_defaults.update({"config": None, "seed": 0, "jobs": 1})

    p = _new_sub(sub, "synth", "Render an analytic scene spec to frames and ground-truth flows.")
    p.add_argument("--spec", required=True, help="SceneSpec JSON file")
    p.add_argument("--out-frames", required=True, help="output directory for PNG frames")
    p.add_argument("--out-flows", default=None, help="optional output directory for ground-truth .flo files")
    common(p)

    p = _new_sub(sub, "flow", "Estimate dense flow between two frames and write a .flo file.")
    p.add_argument("--frame-a", required=True)
    p.add_argument("--frame-b", required=True)
    p.add_argument("--out", required=True)
    _add_flow_params(p)
    common(p)

    p = _new_sub(sub, "decouple", "Decouple camera rotation from a frame sequence.")
    p.add_argument("--frames", required=True, help="directory of numbered PNG frames")
    p.add_argument("--out", required=True, help="output directory (derotated/, flows/, track.json)")
    _add_flow_params(p)
    _opt(p, "--stride", 4, int, "rotation estimator sampling stride")
    _opt(p, "--irls-rounds", 3, int, "robust refit rounds")
    common(p)

    p = _new_sub(sub, "rerotate", "Re-apply a rotation track to frames.")
    p.add_argument("--frames", required=True)
    p.add_argument("--track", required=True)
    p.add_argument("--out", required=True)
    common(p)

    p = _new_sub(sub, "rotflow", "Write the analytic pixel flow of a rotation as .flo.")
    _opt(p, "--yaw", 0.0, float, "yaw about the polar axis, degrees")
    _opt(p, "--pitch", 0.0, float, "pitch about +x, degrees")
    _opt(p, "--roll", 0.0, float, "roll about +z, degrees")
    p.add_argument("--height", required=True, type=int)
    p.add_argument("--width", required=True, type=int)
    p.add_argument("--out", required=True)
    common(p)

    p = _new_sub(sub, "warp-noise", "Warp a Gaussian noise grid along a flow sequence.")
    p.add_argument("--flows", required=True, help="directory of .flo files, sorted order")
    p.add_argument("--out", required=True, help="output directory for noise_%%04d.erpf grids")
    _opt(p, "--channels", 1, int, "noise channels")
    common(p)

    p = _new_sub(sub, "degrade", "Blend a noise grid with fresh noise (variance preserving).")
    p.add_argument("--noise", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--gamma",
        default=None,
        type=float,
        help="blend amount in [0, 1] (default: drawn uniformly from the seed)",
    )
    common(p)

    p = _new_sub(sub, "roll", "Cyclic longitude roll by theta/360*W columns (exact integers only).")
    p.add_argument("--theta", required=True, type=float, help="roll angle, degrees")
    p.add_argument("--width", required=True, type=int, help="raster width in columns")
    p.add_argument("--input", default=None, help="optional raster to roll (.erpf or .png)")
    p.add_argument("--out", default=None, help="output path for the rolled raster")
    common(p)

    p = _new_sub(sub, "unroll", "Undo an accumulated longitude roll.")
    p.add_argument("--shift", required=True, type=int, help="accumulated shift in columns")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    common(p)

    p = _new_sub(sub, "metric", "Compute a metric report (JSON on stdout).")
    p.add_argument("kind", choices=["psnr", "ssim", "epe", "endcont"])
    p.add_argument("--a", default=None, help="image file or frame directory (psnr/ssim)")
    p.add_argument("--b", default=None, help="image file or frame directory (psnr/ssim)")
    p.add_argument("--est", default=None, help=".flo file or directory (epe)")
    p.add_argument("--ref", default=None, help=".flo file or directory (epe)")
    p.add_argument("--frames", default=None, help="image file or frame directory (endcont)")
    p.add_argument("--out", default=None, help="optional JSON report path")
    common(p)

    p = _new_sub(sub, "flowvis", "Render a .flo file with the flow color wheel.")
    p.add_argument("--flow", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-mag", default=None, type=float, help="saturation normaliser (default: 99th percentile)")
    common(p)

    p = _new_sub(sub, "curate", "Run the dataset curation pipeline over a corpus directory.")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="JSONL manifest path")
    cfg = CurationConfig()
    _opt(p, "--stereo-threshold", cfg.stereo_threshold, float, "discard above this left/right SSIM")
    _opt(p, "--fisheye-threshold", cfg.fisheye_threshold, float, "discard above this black-corner fraction")
    _opt(p, "--black-level", cfg.black_level, float, "grayscale level counted as black")
    _opt(p, "--motion-threshold", cfg.motion_threshold, float, "discard clips below this px/frame motion")
    _opt(p, "--min-clip-s", cfg.min_clip_s, float, "minimum clip duration, seconds")
    _opt(p, "--max-clip-s", cfg.max_clip_s, float, "maximum clip duration, seconds")
    _opt(p, "--transition-trim-s", cfg.transition_trim_s, float, "seconds trimmed around each transition")
    _opt(p, "--resize-min-dim", cfg.resize_min_dim, int, "motion-check resize target")
    _opt(p, "--frames-sampled-per-check", cfg.frames_sampled_per_check, int, "frames sampled for format checks")
    _opt(p, "--transition-threshold", cfg.transition_threshold, float, "mean-abs-diff cut threshold")
    _opt(p, "--max-clips-per-video", cfg.max_clips_per_video, int, "per-video kept-clip cap")
    p.add_argument("--min-rotation-dps", default=None, type=float, help="optional camera-rotation floor, deg/s (default: off)")
    common(p)

    return parser


def _add_flow_params(p):
    _opt(p, "--levels", None, int, "pyramid levels (default: auto from size)")
    _opt(p, "--radius", 4, int, "per-level integer search radius")
    _opt(p, "--block", 8, int, "matching block size")


def _flow_params(args) -> FlowParams:
    return FlowParams(
        levels=_resolve(args, "levels"),
        search_radius=int(_resolve(args, "radius")),
        block_size=int(_resolve(args, "block")),
    )


def _load_frames(path):
    path = Path(path)
    if path.is_file():
        return [load_png(path)]
    if not path.is_dir():
        raise FormatError(f"no such file or directory: {path}")
    files = sorted(path.glob("*.png"))
    if not files:
        raise FormatError(f"no PNG frames in {path}")
    return [load_png(p) for p in files]


def _load_flows(path):
    path = Path(path)
    if path.is_file():
        return [read_flo(path)]
    if not path.is_dir():
        raise FormatError(f"no such file or directory: {path}")
    files = sorted(path.glob("*.flo"))
    if not files:
        raise FormatError(f"no .flo files in {path}")
    return [read_flo(p) for p in files]


def _load_raster(path):
    path = Path(path)
    if path.suffix == ".erpf":
        return load_erpf(path), "erpf"
    return load_png(path), "png"


def _save_raster(arr, path, kind):
    if kind == "erpf":
        save_erpf(arr, path)
    else:
        save_png(arr, path)


def _cmd_synth(args) -> int:
    spec = spec_from_json(Path(args.spec).read_text(encoding="utf-8"))
    frames = render(spec)
    out = Path(args.out_frames)
    out.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(frames):
        save_png(frame, out / f"frame_{t:04d}.png")
    if args.out_flows:
        fout = Path(args.out_flows)
        fout.mkdir(parents=True, exist_ok=True)
        for t, fl in enumerate(gt_flows(spec)):
            write_flo(fl, fout / f"flow_{t:04d}.flo")
    print(json.dumps({"frames": len(frames), "height": spec.h, "width": spec.w}))
    return 0


def _cmd_flow(args) -> int:
    a = load_png(args.frame_a)
    b = load_png(args.frame_b)
    write_flo(estimate_flow(a, b, _flow_params(args)), args.out)
    return 0


def _cmd_decouple(args) -> int:
    frames = _load_frames(args.frames)
    result = decouple_pipeline(
        frames,
        flow_params=_flow_params(args),
        rot_params=RotationEstParams(
            stride=int(_resolve(args, "stride")),
            irls_rounds=int(_resolve(args, "irls_rounds")),
        ),
        jobs=int(_resolve(args, "jobs")),
    )
    out = Path(args.out)
    (out / "derotated").mkdir(parents=True, exist_ok=True)
    (out / "flows").mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(result.derotated):
        save_png(frame, out / "derotated" / f"frame_{t:04d}.png")
    for t, fl in enumerate(result.derotated_flows):
        write_flo(fl, out / "flows" / f"flow_{t:04d}.flo")
    h, w = frames[0].shape[:2]
    save_track(result.track, out / "track.json", h, w)
    print(json.dumps({"frames": len(frames), "track": str(out / "track.json")}))
    return 0


def _cmd_rerotate(args) -> int:
    frames = _load_frames(args.frames)
    track, _, _ = load_track(args.track)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(rerotate_frames(frames, track)):
        save_png(frame, out / f"frame_{t:04d}.png")
    return 0


def _cmd_rotflow(args) -> int:
    from .motion import rotation_flow

    rot = rotation_from_euler(
        float(_resolve(args, "yaw")), float(_resolve(args, "pitch")), float(_resolve(args, "roll"))
    )
    _, pix = rotation_flow(rot, args.height, args.width)
    write_flo(pix, args.out)
    return 0


def _cmd_warp_noise(args) -> int:
    flows = _load_flows(args.flows)
    h, w = flows[0].shape
    channels = int(_resolve(args, "channels"))
    seed = int(_resolve(args, "seed"))
    q0 = sample_noise(h, w, channels, derive_seed(seed, "noise:init"))
    grids = warp_chain(q0, flows, derive_seed(seed, "noise:chain"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t, grid in enumerate(grids):
        save_noise(grid, out / f"noise_{t:04d}.erpf")
    print(json.dumps({"grids": len(grids), "height": h, "width": w, "channels": channels}))
    return 0


def _cmd_degrade(args) -> int:
    grid = load_noise(args.noise)
    seed = int(_resolve(args, "seed"))
    gamma = args.gamma
    if gamma is None:
        gamma = float(uniforms_at(derive_seed(seed, "degrade:gamma"), np.arange(1, dtype=np.uint64))[0])
    save_noise(degrade(grid, gamma, derive_seed(seed, "degrade")), args.out)
    print(json.dumps({"gamma": gamma}))
    return 0


def _cmd_roll(args) -> int:
    if args.input is not None:
        arr, kind = _load_raster(args.input)
        rolled, shift = roll_longitude(arr, args.theta, args.width)
        if not args.out:
            raise ConfigError("--out is required when --input is given")
        _save_raster(rolled, args.out, kind)
    else:
        # Shift computation only; validate against a phantom raster width.
        _, shift = roll_longitude(np.zeros((1, args.width)), args.theta, args.width)
    print(json.dumps({"theta": args.theta, "width": args.width, "shift": shift}))
    return 0


def _cmd_unroll(args) -> int:
    arr, kind = _load_raster(args.input)
    _save_raster(unroll(arr, args.shift), args.out, kind)
    return 0


def _cmd_metric(args) -> int:
    kind = args.kind
    if kind in ("psnr", "ssim"):
        if not args.a or not args.b:
            raise ConfigError(f"metric {kind} needs --a and --b")
        fa = _load_frames(args.a)
        fb = _load_frames(args.b)
        if len(fa) != len(fb):
            raise ShapeError(f"frame counts differ: {len(fa)} vs {len(fb)}")
        fn = psnr if kind == "psnr" else ssim
        report = MetricReport.from_values(kind, [fn(x, y) for x, y in zip(fa, fb)], _metric_params(kind))
    elif kind == "epe":
        if not args.est or not args.ref:
            raise ConfigError("metric epe needs --est and --ref")
        fe = _load_flows(args.est)
        fr = _load_flows(args.ref)
        if len(fe) != len(fr):
            raise ShapeError(f"flow counts differ: {len(fe)} vs {len(fr)}")
        report = MetricReport.from_values("epe", [epe(e, r) for e, r in zip(fe, fr)], {"wrap": "longitude"})
    else:
        if not args.frames:
            raise ConfigError("metric endcont needs --frames")
        frames = _load_frames(args.frames)
        report = MetricReport.from_values(
            "end_continuity", [end_continuity([f]) for f in frames], {"columns": "0 vs W-1"}
        )
    print(report.to_json())
    if args.out:
        write_report(report, args.out)
    return 0


def _metric_params(kind: str) -> dict:
    if kind == "ssim":
        return {"window": 11, "sigma": 1.5, "k1": 0.01, "k2": 0.03, "range": 1.0}
    return {"peak": 1.0}


def _cmd_flowvis(args) -> int:
    field = read_flo(args.flow)
    save_png(flow_to_color(field, args.max_mag), args.out)
    return 0


def _cmd_curate(args) -> int:
    config = CurationConfig(
        stereo_threshold=float(_resolve(args, "stereo_threshold")),
        fisheye_threshold=float(_resolve(args, "fisheye_threshold")),
        black_level=float(_resolve(args, "black_level")),
        motion_threshold=float(_resolve(args, "motion_threshold")),
        min_clip_s=float(_resolve(args, "min_clip_s")),
        max_clip_s=float(_resolve(args, "max_clip_s")),
        transition_trim_s=float(_resolve(args, "transition_trim_s")),
        resize_min_dim=int(_resolve(args, "resize_min_dim")),
        frames_sampled_per_check=int(_resolve(args, "frames_sampled_per_check")),
        transition_threshold=float(_resolve(args, "transition_threshold")),
        max_clips_per_video=int(_resolve(args, "max_clips_per_video")),
        min_rotation_dps=args.min_rotation_dps,
    )
    records = curate(args.corpus, config, jobs=int(_resolve(args, "jobs")))
    write_manifest(records, args.out)
    kept = sum(1 for r in records if r.get("verdict") == "keep")
    print(json.dumps({"records": len(records), "kept": kept}))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "flow": _cmd_flow,
    "decouple": _cmd_decouple,
    "rerotate": _cmd_rerotate,
    "rotflow": _cmd_rotflow,
    "warp-noise": _cmd_warp_noise,
    "degrade": _cmd_degrade,
    "roll": _cmd_roll,
    "unroll": _cmd_unroll,
    "metric": _cmd_metric,
    "flowvis": _cmd_flowvis,
    "curate": _cmd_curate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return 1
        args._config = _read_config(getattr(args, "config", None), args)
        args._parser = _subparser_for(parser, args.command)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, ShapeError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ErpMotionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _subparser_for(parser: _Parser, command: str):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise ConfigError(f"unknown command {command}")


def _read_config(path, args) -> dict:
    if not path:
        return {}
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad config JSON in {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config {path} must be a flat JSON object")
    known = set(vars(args)) - {"command", "config"}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    return payload


if __name__ == "__main__":
    sys.exit(main())
