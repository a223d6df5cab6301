"""Shared interpolation primitives (raw ndarray level, no Frame wrappers)."""

from __future__ import annotations

import numpy as np


def bilinear_sample(data: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample (H, W) or (H, W, C) data at float coordinates, clamping to edges.

    Accumulates in float64 so the result is a true convex combination (never
    outside [min, max] of the inputs after the final float32 cast). Integer
    coordinates reproduce the underlying samples exactly.
    """
    squeeze = data.ndim == 2
    if squeeze:
        data = data[:, :, None]
    h, w, c = data.shape
    x = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    y = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0

    flat = data.reshape(-1, c).astype(np.float64, copy=False)
    i00 = y0 * w + x0
    i01 = y0 * w + x1
    i10 = y1 * w + x0
    i11 = y1 * w + x1
    w00 = ((1.0 - fy) * (1.0 - fx))[..., None]
    w01 = ((1.0 - fy) * fx)[..., None]
    w10 = (fy * (1.0 - fx))[..., None]
    w11 = (fy * fx)[..., None]
    out = (w00 * flat[i00] + w01 * flat[i01] + w10 * flat[i10] + w11 * flat[i11])
    out = out.astype(np.float32)
    return out[..., 0] if squeeze else out


def interp1d_along_axis(values: np.ndarray, src: np.ndarray, dst: np.ndarray,
                        axis: int) -> np.ndarray:
    """Linear interpolation of `values` from grid `src` to `dst` along `axis`.

    `src` must be strictly increasing; queries outside its range clamp to the
    end values. Used to lift block-grid motion onto the pixel grid.
    """
    values = np.moveaxis(values, axis, 0)
    src = np.asarray(src, dtype=np.float64)
    if len(src) == 1:
        out = np.repeat(values, len(dst), axis=0)
        return np.moveaxis(out, 0, axis)
    dst = np.clip(np.asarray(dst, dtype=np.float64), src[0], src[-1])
    hi = np.clip(np.searchsorted(src, dst, side="right"), 1, len(src) - 1)
    lo = hi - 1
    span = src[hi] - src[lo]
    t = np.where(span > 0, (dst - src[lo]) / np.where(span > 0, span, 1.0), 0.0)
    shape = (len(dst),) + (1,) * (values.ndim - 1)
    t = t.reshape(shape)
    out = values[lo] * (1.0 - t) + values[hi] * t
    return np.moveaxis(out, 0, axis)


def box_window_sum(plane: np.ndarray, window: int) -> np.ndarray:
    """Sum over a centered (window x window) neighborhood, replicate borders."""
    if window % 2 == 0 or window < 1:
        raise ValueError("window must be odd and >= 1")
    r = window // 2
    padded = np.pad(plane.astype(np.float64), r, mode="edge")
    cs = padded.cumsum(0).cumsum(1)
    cs = np.pad(cs, ((1, 0), (1, 0)))
    h, w = plane.shape
    x0 = np.arange(w)
    # window [y0, y0+2r] x [x0, x0+2r] in padded coords
    top = cs[0:h, :]
    bot = cs[window:window + h, :]
    return (bot[:, x0 + window] - bot[:, x0] - top[:, x0 + window] + top[:, x0])
