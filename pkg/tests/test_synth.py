import numpy as np
import pytest

from erpmotion import epe_map, estimate_flow, mean_magnitude, psnr, derotate_frames, warp_noise
from erpmotion.errors import ConfigError, ShapeError
from erpmotion.geometry import _dir_grid
from erpmotion.synth import DiscSpec, SceneSpec, _disc_center, _texture, gt_flows, render, spec_from_json, spec_to_json


def test_render_deterministic():
    spec = SceneSpec(h=32, w=64, frames=3, texture="blobs", seed=4, blob_sigma=0.35)
    a = render(spec)
    b = render(spec)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_identity_camera_frames_identical():
    spec = SceneSpec(h=32, w=64, frames=4, texture="latlong-grad")
    frames = render(spec)
    for f in frames[1:]:
        np.testing.assert_array_equal(f, frames[0])


def test_integer_yaw_schedule_is_exact_roll():
    # 22.5 deg on W=64 -> exactly 4 columns per frame
    sched = ((0, 0, 0), (22.5, 0, 0), (45.0, 0, 0))
    spec = SceneSpec(h=32, w=64, frames=3, texture="blobs", seed=2, blob_sigma=0.35, euler_schedule=sched)
    frames = render(spec)
    np.testing.assert_allclose(frames[1], np.roll(frames[0], 4, axis=1), atol=1e-12)
    np.testing.assert_allclose(frames[2], np.roll(frames[0], 8, axis=1), atol=1e-12)


def test_blob_frame_matches_direct_evaluation():
    spec = SceneSpec(h=16, w=32, frames=1, texture="blobs", seed=7, blob_sigma=0.4)
    frame = render(spec)[0]
    dirs = _dir_grid(16, 32)
    direct = np.empty((16, 32, 3))
    for i in range(16):
        for j in range(32):
            direct[i, j] = _texture(spec, dirs[i, j][None, :])[0]
    np.testing.assert_array_equal(frame, direct)


def test_checker_texture_two_levels():
    spec = SceneSpec(h=32, w=64, frames=1, texture="checker", checker_n=4)
    frame = render(spec)[0]
    assert set(np.unique(frame)) == {0.2, 0.8}


def test_static_no_object_zero_flows():
    spec = SceneSpec(h=32, w=64, frames=3, texture="latlong-grad")
    for f in gt_flows(spec):
        assert np.abs(f.du).max() < 1e-9 and np.abs(f.dv).max() < 1e-9


def test_pure_yaw_uniform_gt_flow():
    sched = ((0, 0, 0), (9.0, 0, 0))  # 9/360*64 = 1.6 px
    spec = SceneSpec(h=32, w=64, frames=2, texture="latlong-grad", euler_schedule=sched)
    f = gt_flows(spec)[0]
    np.testing.assert_allclose(f.du, 1.6, atol=1e-9)
    np.testing.assert_allclose(f.dv, 0.0, atol=1e-9)


def test_estimator_agrees_with_gt():
    spec = SceneSpec(h=240, w=480, frames=2, texture="blobs", seed=5, euler_schedule=((0, 0, 0), (2.6, 0, 0)))
    frames = render(spec)
    gt = gt_flows(spec)[0]
    assert epe_map(estimate_flow(frames[0], frames[1]), gt).mean() < 1.0


def test_consistency_triangle():
    sched = [(0.0, 0.0, 0.0)] + [(3.0 * t, 1.5 * np.sin(t), 1.0 * np.cos(t)) for t in range(1, 4)]
    spec = SceneSpec(h=120, w=240, frames=4, texture="blobs", seed=9, blob_sigma=0.3, euler_schedule=tuple(sched))
    frames = render(spec)
    out = derotate_frames(frames, spec.track())
    for t in range(1, 4):
        assert psnr(out[t], frames[0]) >= 35.0
    static = SceneSpec(h=120, w=240, frames=4, texture="blobs", seed=9, blob_sigma=0.3)
    for f in gt_flows(static):
        assert mean_magnitude(f) < 1e-9


def test_disc_renders_and_moves():
    disc = DiscSpec(center=(0, 0, 1), radius_deg=20, omega_deg=5, color=(1, 0, 0))
    spec = SceneSpec(h=48, w=96, frames=3, texture="latlong-grad", disc=disc)
    frames = render(spec)
    assert not np.array_equal(frames[0], frames[1])
    dirs = _dir_grid(48, 96)
    mask0 = dirs @ _disc_center(spec, 0) > np.cos(np.deg2rad(20))
    mask1 = dirs @ _disc_center(spec, 1) > np.cos(np.deg2rad(20))
    # off-disc pixels identical across frames (camera static)
    off = ~(mask0 | mask1)
    np.testing.assert_array_equal(frames[0][off], frames[1][off])


def test_disc_gt_flow_advects_disc():
    disc = DiscSpec(center=(0, 0, 1), radius_deg=18, omega_deg=4, color=(1, 0.2, 0.2))
    spec = SceneSpec(h=48, w=96, frames=2, texture="latlong-grad", disc=disc)
    f = gt_flows(spec)[0]
    dirs = _dir_grid(48, 96)
    mask = dirs @ _disc_center(spec, 0) > np.cos(np.deg2rad(18))
    # Equatorial disc about +y: 4 deg -> 4/360*96 px rightward.
    assert f.du[mask].mean() == pytest.approx(4 / 360 * 96, abs=0.05)
    assert np.abs(f.du[~mask]).max() < 1e-9


def test_disc_seam_crossing_noise_transport():
    """GT flow of a disc crossing longitude 180 transports a tagged noise
    patch across the seam intact."""
    from erpmotion import sample_noise

    h, w = 32, 64
    # Disc centred just left of the seam (longitude ~177 deg), moving east.
    lam = np.deg2rad(177.0)
    disc = DiscSpec(center=(np.sin(lam), 0.0, np.cos(lam)), radius_deg=15, omega_deg=22.5, color=(1, 0, 0))
    spec = SceneSpec(h=h, w=w, frames=2, texture="latlong-grad", disc=disc)
    f = gt_flows(spec)[0]
    dirs = _dir_grid(h, w)
    mask = dirs @ _disc_center(spec, 0) > np.cos(np.deg2rad(15))
    cols = np.where(mask.any(axis=0))[0]
    assert cols.max() >= w - 1 or cols.min() == 0  # touches the seam region
    q = sample_noise(h, w, 1, seed=3)
    out = warp_noise(q, f, seed=5)
    # 22.5 deg = exactly 4 columns: disc pixels move by an exact column shift.
    ii, jj = np.where(mask)
    landed = out.values[ii, (jj + 4) % w, 0]
    np.testing.assert_array_equal(landed, q.values[ii, jj, 0])


def test_spec_json_round_trip():
    disc = DiscSpec(center=(0, 0, 1), radius_deg=25, omega_deg=1.5, color=(0.9, 0.3, 0.2))
    spec = SceneSpec(h=64, w=128, frames=5, seed=3, texture="blobs", euler_schedule=((0, 0, 0),) * 5, disc=disc)
    back = spec_from_json(spec_to_json(spec))
    assert back == spec


def test_spec_json_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        spec_from_json('{"h": 4, "w": 8, "frames": 1, "bogus": 2}')


def test_spec_validation():
    with pytest.raises(ShapeError):
        SceneSpec(h=32, w=65, frames=1)
    with pytest.raises(ConfigError):
        SceneSpec(h=32, w=64, frames=0)
    with pytest.raises(ConfigError):
        SceneSpec(h=32, w=64, frames=1, texture="marble")
    with pytest.raises(ConfigError):
        DiscSpec(radius_deg=95.0)
    with pytest.raises(ConfigError):
        SceneSpec(h=32, w=64, frames=2, euler_schedule=((1, 0, 0), (2, 0, 0)))
