"""Quantitative evaluation: PSNR, single-scale SSIM, endpoint error, and
temporal profiles for flicker inspection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame import Frame
from .motion import MotionField

PSNR_CAP = 99.0


@dataclass
class Metrics:
    psnr: float
    ssim: float | None = None
    epe_mean: float | None = None
    epe_p90: float | None = None


def metric_line(name: str, value: float) -> str:
    return f"metric name={name} value={value:.4f}"


def psnr(a: Frame, b: Frame, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE) with inputs clamped to [0, 1]; capped at 99 dB."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"dimension mismatch: {a.data.shape} vs {b.data.shape}")
    da = np.clip(a.data.astype(np.float64), 0.0, 1.0)
    db = np.clip(b.data.astype(np.float64), 0.0, 1.0)
    mse = np.mean((da - db) ** 2)
    if mse < 1e-10:
        return PSNR_CAP
    return float(10.0 * np.log10(peak * peak / mse))


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _valid_filter(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    # separable 'valid' correlation with the 1-D kernel along both axes
    n = len(k)
    h, w = img.shape
    out = np.zeros((h, w - n + 1))
    for i in range(n):
        out += k[i] * img[:, i:i + w - n + 1]
    out2 = np.zeros((h - n + 1, w - n + 1))
    for i in range(n):
        out2 += k[i] * out[i:i + h - n + 1, :]
    return out2


def ssim(a: Frame, b: Frame) -> float:
    """Single-scale SSIM: 11x11 Gaussian window sigma=1.5, K1=0.01, K2=0.03,
    dynamic range 1, averaged over valid window positions. Single channel only.
    """
    if a.channels != 1 or b.channels != 1:
        raise ValueError("ssim expects single-channel frames (convert via luma)")
    if a.data.shape != b.data.shape:
        raise ValueError(f"dimension mismatch: {a.data.shape} vs {b.data.shape}")
    if min(a.height, a.width) < 11:
        raise ValueError("ssim needs min dimension >= 11")
    x = np.clip(a.data[:, :, 0].astype(np.float64), 0.0, 1.0)
    y = np.clip(b.data[:, :, 0].astype(np.float64), 0.0, 1.0)
    k = _gaussian_kernel()
    c1 = 0.01 ** 2
    c2 = 0.03 ** 2
    mu_x = _valid_filter(x, k)
    mu_y = _valid_filter(y, k)
    xx = _valid_filter(x * x, k) - mu_x * mu_x
    yy = _valid_filter(y * y, k) - mu_y * mu_y
    xy = _valid_filter(x * y, k) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def endpoint_error(field: MotionField, gt: MotionField,
                   border_crop: int = 16) -> tuple[float, float]:
    """Mean and 90th-percentile Euclidean vector error over the interior."""
    if field.data.shape != gt.data.shape:
        raise ValueError(f"dimension mismatch: {field.data.shape} vs {gt.data.shape}")
    c = border_crop
    if 2 * c >= min(field.height, field.width):
        raise ValueError(f"border_crop {c} leaves no interior")
    diff = (field.data.astype(np.float64) - gt.data.astype(np.float64))
    if c > 0:
        diff = diff[c:-c, c:-c]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    return float(dist.mean()), float(np.percentile(dist, 90))


def temporal_profile(frames: list[Frame], row: int) -> Frame:
    """Stack one scanline per frame into an (nframes x width) image."""
    if len(frames) < 2:
        raise ValueError("temporal profile needs at least 2 frames")
    h = frames[0].height
    if not 0 <= row < h:
        raise ValueError(f"row {row} out of bounds for height {h}")
    for f in frames[1:]:
        if f.data.shape != frames[0].data.shape:
            raise ValueError("frames differ in shape")
    rows = [f.data[row] for f in frames]
    return Frame(np.stack(rows, axis=0))
