import json

import numpy as np
import pytest

from erpmotion import MetricReport, end_continuity, psnr, rotate_erp, rotation_from_euler, ssim
from erpmotion.errors import ShapeError
from erpmotion.metrics import write_report


def test_psnr_identical_is_inf(blob_image):
    assert psnr(blob_image, blob_image) == float("inf")


def test_psnr_uniform_difference_20db():
    a = np.full((16, 16, 1), 0.3)
    b = np.full((16, 16, 1), 0.4)
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)


def test_psnr_matches_two_pass_oracle(rng):
    a = rng.uniform(size=(24, 32, 3))
    b = rng.uniform(size=(24, 32, 3))
    # independent two-pass summation
    total = 0.0
    for i in range(24):
        for j in range(32):
            for c in range(3):
                total += (a[i, j, c] - b[i, j, c]) ** 2
    mse = total / (24 * 32 * 3)
    assert psnr(a, b) == pytest.approx(10 * np.log10(1 / mse), abs=1e-6)


def test_psnr_symmetry(rng):
    a = rng.uniform(size=(16, 16, 1))
    b = rng.uniform(size=(16, 16, 1))
    assert psnr(a, b) == pytest.approx(psnr(b, a), rel=1e-12)


def test_psnr_shape_mismatch():
    with pytest.raises(ShapeError):
        psnr(np.zeros((4, 4, 1)), np.zeros((4, 5, 1)))


def test_ssim_self_is_one(blob_image):
    assert ssim(blob_image, blob_image) == pytest.approx(1.0, abs=1e-12)


def test_ssim_symmetry(rng):
    a = rng.uniform(size=(32, 32, 1))
    b = rng.uniform(size=(32, 32, 1))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_negative_image_low(rng):
    # Mid-gray-free fixture: values in {0.1, 0.9} patches.
    a = np.where(rng.uniform(size=(48, 48, 1)) > 0.5, 0.9, 0.1)
    from scipy.ndimage import uniform_filter

    a = uniform_filter(a[..., 0], 3)[..., None]
    assert ssim(a, 1.0 - a) < 0.2


def test_ssim_matches_reference_oracle(rng):
    skimage_metrics = pytest.importorskip("skimage.metrics")
    a = rng.uniform(size=(40, 56, 3))
    b = np.clip(a + rng.normal(0, 0.08, a.shape), 0, 1)
    from erpmotion.imageops import to_gray

    ref = skimage_metrics.structural_similarity(
        to_gray(a),
        to_gray(b),
        win_size=11,
        gaussian_weights=True,
        sigma=1.5,
        use_sample_covariance=False,
        data_range=1.0,
        K1=0.01,
        K2=0.03,
    )
    assert ssim(a, b) == pytest.approx(ref, abs=1e-9)


def test_ssim_constant_closed_form():
    mu1, mu2 = 0.2, 0.7
    a = np.full((32, 32, 1), mu1)
    b = np.full((32, 32, 1), mu2)
    c1 = 0.01**2
    expected = (2 * mu1 * mu2 + c1) / (mu1**2 + mu2**2 + c1)
    assert ssim(a, b) == pytest.approx(expected, abs=1e-9)


def test_ssim_rejects_small_images():
    with pytest.raises(ShapeError):
        ssim(np.zeros((8, 8, 1)), np.zeros((8, 8, 1)))


def test_end_continuity_equal_columns_zero(rng):
    img = rng.uniform(size=(8, 16, 3))
    img[:, -1] = img[:, 0]
    assert end_continuity([img]) == 0.0


def test_end_continuity_random_positive(rng):
    assert end_continuity([rng.uniform(size=(8, 16, 1))]) > 0.0


def test_end_continuity_periodic_ramp_analytic():
    h, w = 8, 32
    j = np.arange(w)
    img = (0.5 + 0.4 * np.sin(2 * np.pi * (j + 0.5) / w))[None, :, None] * np.ones((h, 1, 1))
    expected = (0.8 * np.sin(np.pi / w)) ** 2
    assert end_continuity([img]) == pytest.approx(expected, abs=1e-12)


def test_end_continuity_mean_over_frames(rng):
    a = rng.uniform(size=(8, 16, 1))
    b = rng.uniform(size=(8, 16, 1))
    both = end_continuity([a, b])
    assert both == pytest.approx((end_continuity([a]) + end_continuity([b])) / 2, abs=1e-12)


def test_end_continuity_roll_consistency(blob_image):
    """Rotating by an integer-column yaw equals rolling the image directly."""
    alpha = 45.0  # 32 columns on W=256
    rotated = rotate_erp(blob_image, rotation_from_euler(alpha, 0, 0))
    rolled = np.roll(blob_image, 32, axis=1)
    assert end_continuity([rotated]) == end_continuity([rolled])


def test_metric_report_json(tmp_path):
    report = MetricReport.from_values("psnr", [20.0, float("inf")], {"peak": 1.0})
    assert report.mean == float("inf")
    payload = json.loads(report.to_json())
    assert payload["per_frame"] == [20.0, "inf"]
    assert payload["mean"] == "inf"
    path = tmp_path / "r.json"
    write_report(report, path)
    assert json.loads(path.read_text())["name"] == "psnr"


def test_metric_report_mean_is_arithmetic(rng):
    vals = rng.uniform(0, 50, 7).tolist()
    report = MetricReport.from_values("epe", vals)
    assert abs(report.mean - sum(vals) / len(vals)) < 1e-9
