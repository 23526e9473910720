"""Image and loop-consistency metrics: PSNR, single-scale SSIM, end
continuity (seam MSE), plus a small JSON report carrier.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ShapeError
from .imageops import to_gray

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images; inf when equal."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = (size - 1) / 2.0
    x = np.arange(size) - r
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _windowed(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = correlate1d(img, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    m = (len(kernel) - 1) // 2
    return out[m:img.shape[0] - m, m:img.shape[1] - m]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01,
    K2=0.03, dynamic range 1.0, averaged over fully valid window positions.
    Color inputs are converted to grayscale with Rec. 601 weights."""
    a, b = _check_pair(a, b)
    ga = to_gray(a)
    gb = to_gray(b)
    if min(ga.shape[:2]) < SSIM_WINDOW:
        raise ShapeError(f"image {ga.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    mu_a = _windowed(ga, kernel)
    mu_b = _windowed(gb, kernel)
    var_a = _windowed(ga * ga, kernel) - mu_a * mu_a
    var_b = _windowed(gb * gb, kernel) - mu_b * mu_b
    cov = _windowed(ga * gb, kernel) - mu_a * mu_b
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def end_continuity(frames) -> float:
    """Mean over frames of the MSE between the leftmost and rightmost
    columns; squared error is averaged over all pixel-channels jointly."""
    if len(frames) < 1:
        raise ShapeError("end_continuity needs at least one frame")
    vals = []
    for f in frames:
        f = np.asarray(f, dtype=np.float64)
        vals.append(float(np.mean((f[:, 0] - f[:, -1]) ** 2)))
    return float(np.mean(vals))


@dataclass(frozen=True)
class MetricReport:
    """Named metric with per-frame values, their mean, and the parameters."""

    name: str
    per_frame: list
    mean: float
    params: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, name: str, values, params: dict | None = None) -> "MetricReport":
        values = [float(v) for v in values]
        return cls(name=name, per_frame=values, mean=float(np.mean(values)), params=dict(params or {}))

    def to_json(self) -> str:
        def enc(v):
            return "inf" if v == float("inf") else v

        payload = {
            "name": self.name,
            "params": self.params,
            "per_frame": [enc(v) for v in self.per_frame],
            "mean": enc(self.mean),
        }
        return json.dumps(payload)


def write_report(report: MetricReport, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(report.to_json())
        f.write("\n")
