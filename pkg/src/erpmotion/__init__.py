"""Spherical motion toolkit for equirectangular (ERP) video.

Geometry, flow, camera-rotation decoupling, Gaussian-preserving noise
warping, loop-consistency metrics, analytic test scenes, and a dataset
curation pipeline, all behind one CLI (``erpmotion``).
"""

__version__ = "0.1.0"

from .blockmatch import FlowParams, estimate_flow
from .curation import ClipRecord, CurationConfig, curate, detect_transitions, fisheye_score, motion_score, segment_clips, stereo3d_score
from .errors import ConfigError, ErpMotionError, EstimationError, FormatError, ShapeError
from .flow import FlowField, SphericalFlow, epe, epe_map, flow_to_color, mean_magnitude, pixel_to_spherical, read_flo, spherical_to_pixel, wrap_columns, write_flo
from .geometry import (
    bilinear_sample,
    circular_pad,
    crop_pad,
    dir_to_pixel,
    geodesic_distance,
    pixel_to_dir,
    polar_orthonormalize,
    rotate_erp,
    rotation_from_euler,
)
from .image_io import load_erpf, load_png, save_erpf, save_png
from .metrics import MetricReport, end_continuity, psnr, ssim
from .motion import (
    DecoupleResult,
    RotationEstParams,
    RotationTrack,
    accumulate,
    decompose_flow,
    decouple_pipeline,
    derotate_frames,
    estimate_rotation,
    load_track,
    rerotate_frames,
    rotation_flow,
    save_track,
)
from .noisewarp import NoiseGrid, degrade, load_noise, remap_pixel, roll_longitude, sample_noise, save_noise, unroll, warp_chain, warp_noise
from .rng import derive_seed, normals_at, uniforms_at
from .synth import DiscSpec, SceneSpec, gt_flows, render, spec_from_json, spec_to_json
