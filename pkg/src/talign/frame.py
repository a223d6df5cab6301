"""Frames, sequences, file I/O, color conversion, descriptors and degradation.

A Frame is a (height, width, channels) float32 array with samples nominally
in [0, 1]. Values may leave that range (e.g. after noise injection); they are
clamped only when quantizing to disk or computing metrics.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import rng

# BT.601 full-range luma coefficients
_LUMA_R = 0.299
_LUMA_G = 0.587
_LUMA_B = 0.114


@dataclass
class Frame:
    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] < 1:
            raise ValueError(f"frame data must be (H, W, C), got shape {arr.shape}")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.isfinite(arr).all():
            raise ValueError("frame contains non-finite samples")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def same_shape(self, other: "Frame") -> bool:
        return self.data.shape == other.data.shape

    def rgb(self) -> "Frame":
        """First three channels (identity for plain RGB frames)."""
        if self.channels < 3:
            raise ValueError("frame has fewer than 3 channels")
        return Frame(self.data[:, :, :3].copy())


@dataclass
class Sequence:
    """2N+1 frames indexed -N..+N; the reference frame sits at index 0."""

    frames: list[Frame]

    def __post_init__(self) -> None:
        n = len(self.frames)
        if n < 3 or n % 2 == 0:
            raise ValueError(f"sequence needs an odd frame count >= 3, got {n}")
        shape = self.frames[0].data.shape
        for i, f in enumerate(self.frames):
            if f.data.shape != shape:
                raise ValueError(
                    f"frame {i} has shape {f.data.shape}, expected {shape}"
                )

    @property
    def n_side(self) -> int:
        return (len(self.frames) - 1) // 2

    def frame(self, j: int) -> Frame:
        """Frame at temporal offset j in [-N, N]."""
        n = self.n_side
        if not -n <= j <= n:
            raise ValueError(f"offset {j} outside [-{n}, {n}]")
        return self.frames[j + n]

    @property
    def reference(self) -> Frame:
        return self.frame(0)

    def map(self, fn) -> "Sequence":
        return Sequence([fn(f) for f in self.frames])


@dataclass
class NoiseSpec:
    """Gaussian noise level on the 0-255 intensity scale plus a seed."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


# ---------------------------------------------------------------------------
# PNG / Y4M I/O
# ---------------------------------------------------------------------------

def load_frame(path: str) -> Frame:
    """Load an 8-bit PNG (RGB or grayscale) as a [0,1] float frame."""
    if not os.path.exists(path):
        raise ValueError(f"no such file: {path}")
    img = Image.open(path)
    if img.mode in ("I", "I;16", "I;16B", "F"):
        raise ValueError(f"{path}: unsupported bit depth (only 8-bit accepted)")
    if img.mode not in ("RGB", "L"):
        raise ValueError(f"{path}: unsupported image mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.float32) / 255.0
    return Frame(arr)


def save_frame(frame: Frame, path: str) -> None:
    """Write an 8-bit PNG; samples are clamped then rounded half-up."""
    if frame.channels not in (1, 3):
        raise ValueError(f"unsupported channel count {frame.channels} (want 1 or 3)")
    clamped = np.clip(frame.data, 0.0, 1.0)
    quant = np.floor(clamped.astype(np.float64) * 255.0 + 0.5).astype(np.uint8)
    if frame.channels == 1:
        img = Image.fromarray(quant[:, :, 0], mode="L")
    else:
        img = Image.fromarray(quant, mode="RGB")
    img.save(path, format="PNG")


def _expand_pattern(pattern: str) -> list[str]:
    """Expand printf-style patterns like frames_%03d.png to existing files."""
    if "%" not in pattern:
        raise ValueError(f"not a printf-style pattern: {pattern}")
    paths: list[str] = []
    start = 0 if os.path.exists(pattern % 0) else 1
    i = start
    while True:
        p = pattern % i
        if not os.path.exists(p):
            break
        paths.append(p)
        i += 1
    if not paths:
        raise ValueError(f"pattern {pattern} matched no files")
    return paths


def load_sequence(source: str, kind: str = "png-sequence") -> Sequence:
    """Load a sequence from PNG files (directory or %d pattern) or a Y4M file.

    Frame count must be odd; all frames must share dimensions.
    """
    if kind == "y4m":
        frames = _read_y4m(source)
    elif kind == "png-sequence":
        if os.path.isdir(source):
            names = sorted(
                f for f in os.listdir(source) if f.lower().endswith(".png")
            )
            # synthetic output directories also hold clean.png etc.
            frame_names = [f for f in names if f.startswith("frame_")]
            names = frame_names or names
            if not names:
                raise ValueError(f"no PNG files in {source}")
            paths = [os.path.join(source, f) for f in names]
        else:
            paths = _expand_pattern(source)
        frames = [load_frame(p) for p in paths]
    else:
        raise ValueError(f"unknown sequence kind {kind!r}")
    if len(frames) % 2 == 0:
        raise ValueError(f"sequence needs an odd frame count, got {len(frames)}")
    return Sequence(frames)


def _read_y4m(path: str) -> list[Frame]:
    """Minimal YUV4MPEG2 reader: 8-bit 4:2:0 only.

    Chroma planes are upsampled to full resolution by nearest neighbor, then
    converted to RGB with full-range BT.601 coefficients.
    """
    if not os.path.exists(path):
        raise ValueError(f"no such file: {path}")
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(b"YUV4MPEG2"):
        raise ValueError(f"{path}: not a YUV4MPEG2 file")
    header = data[:nl].decode("ascii", "replace").split(" ")
    width = height = 0
    colorspace = "420"
    for tok in header[1:]:
        if tok.startswith("W"):
            width = int(tok[1:])
        elif tok.startswith("H"):
            height = int(tok[1:])
        elif tok.startswith("C"):
            colorspace = tok[1:]
    if width <= 0 or height <= 0:
        raise ValueError(f"{path}: missing W/H in Y4M header")
    if not colorspace.startswith("420"):
        raise ValueError(f"{path}: unsupported Y4M colorspace C{colorspace}")
    if width % 2 or height % 2:
        raise ValueError(f"{path}: 4:2:0 needs even dimensions")

    ysize = width * height
    csize = (width // 2) * (height // 2)
    frames: list[Frame] = []
    pos = nl + 1
    while pos < len(data):
        fnl = data.find(b"\n", pos)
        if fnl < 0 or not data[pos:fnl].startswith(b"FRAME"):
            raise ValueError(f"{path}: malformed FRAME header at byte {pos}")
        pos = fnl + 1
        end = pos + ysize + 2 * csize
        if end > len(data):
            raise ValueError(f"{path}: truncated frame payload")
        yp = np.frombuffer(data, np.uint8, ysize, pos).reshape(height, width)
        up = np.frombuffer(data, np.uint8, csize, pos + ysize)
        vp = np.frombuffer(data, np.uint8, csize, pos + ysize + csize)
        up = up.reshape(height // 2, width // 2).repeat(2, 0).repeat(2, 1)
        vp = vp.reshape(height // 2, width // 2).repeat(2, 0).repeat(2, 1)
        frames.append(_yuv_to_rgb(yp, up, vp))
        pos = end
    if not frames:
        raise ValueError(f"{path}: no frames")
    return frames


def _yuv_to_rgb(yp: np.ndarray, up: np.ndarray, vp: np.ndarray) -> Frame:
    y = yp.astype(np.float32) / 255.0
    cb = up.astype(np.float32) / 255.0 - 0.5
    cr = vp.astype(np.float32) / 255.0 - 0.5
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    out = np.stack([r, g, b], axis=2)
    return Frame(np.clip(out, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Color conversion and descriptors
# ---------------------------------------------------------------------------

def rgb_to_luma(frame: Frame) -> Frame:
    """BT.601 full-range luma: Y = 0.299 R + 0.587 G + 0.114 B."""
    if frame.channels != 3:
        raise ValueError(f"rgb_to_luma needs 3 channels, got {frame.channels}")
    d = frame.data
    y = _LUMA_R * d[:, :, 0] + _LUMA_G * d[:, :, 1] + _LUMA_B * d[:, :, 2]
    return Frame(y[:, :, None])


def _central_diff(plane: np.ndarray, axis: int) -> np.ndarray:
    # replicate-border central difference: (f(x+1) - f(x-1)) / 2
    fwd = np.concatenate(
        [np.take(plane, range(1, plane.shape[axis]), axis=axis),
         np.take(plane, [-1], axis=axis)], axis=axis)
    bwd = np.concatenate(
        [np.take(plane, [0], axis=axis),
         np.take(plane, range(0, plane.shape[axis] - 1), axis=axis)], axis=axis)
    return (fwd - bwd) * 0.5


def to_descriptor(frame: Frame) -> Frame:
    """5-channel matching descriptor: [R, G, B, 0.5|dL/dx|, 0.5|dL/dy|].

    L is the BT.601 luma; gradients are replicate-border central differences.
    The 0.5 scale keeps the gradient channels well inside [0, 1].
    """
    if frame.channels != 3:
        raise ValueError(f"to_descriptor needs 3 channels, got {frame.channels}")
    luma = rgb_to_luma(frame).data[:, :, 0]
    gx = 0.5 * np.abs(_central_diff(luma, axis=1))
    gy = 0.5 * np.abs(_central_diff(luma, axis=0))
    return Frame(np.concatenate([frame.data, gx[:, :, None], gy[:, :, None]], axis=2))


def add_gaussian_noise(frame: Frame, spec: NoiseSpec) -> Frame:
    """Add i.i.d. Gaussian noise of std sigma/255, deterministic in the seed.

    The result is NOT clamped; clamping happens at save/metric time so the
    noise statistics stay unbiased.
    """
    if spec.sigma == 0:
        return Frame(frame.data.copy())
    n = frame.data.size
    noise = rng.normal(spec.seed, n).reshape(frame.data.shape)
    out = frame.data.astype(np.float64) + (spec.sigma / 255.0) * noise
    return Frame(out.astype(np.float32))
