"""Synthetic sequences with exact ground-truth motion.

The texture is a continuous function: position-addressed lattice noise
convolved with a truncated Gaussian. Every frame is the texture evaluated
directly under that frame's cumulative motion transform, so ground-truth
frames carry a single resampling each and no accumulated warping error --
the error accumulation under test lives only in the alignment pipeline.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .frame import Frame, NoiseSpec, Sequence, add_gaussian_noise, save_frame
from .motion import MotionField, save_field


@dataclass
class Constant:
    """Constant velocity, px per hop."""

    v: tuple[float, float]


@dataclass
class Drift:
    """Accelerating translation: offset(j) = v0*j + 0.5*accel*j^2."""

    v0: tuple[float, float]
    accel: tuple[float, float]


@dataclass
class Rotation:
    """Rotation about a fixed center, degrees per hop."""

    center: tuple[float, float]
    omega_deg: float


MotionModel = Constant | Drift | Rotation


@dataclass
class SynthSpec:
    size: tuple[int, int]  # (W, H)
    n_side: int
    motion: MotionModel
    texture_seed: int = 0
    texture_cutoff: float = 0.25
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    degradation: str = "none"  # none | noise | boxblur
    blur_radius: int = 1

    def __post_init__(self) -> None:
        w, h = self.size
        if w < 32 or h < 32:
            raise ValueError("synthetic frames must be at least 32x32")
        if self.n_side < 1:
            raise ValueError("n_side must be >= 1")
        if not 0.0 < self.texture_cutoff <= 1.0:
            raise ValueError("texture_cutoff must be in (0, 1]")
        if self.degradation not in ("none", "noise", "boxblur"):
            raise ValueError(f"unknown degradation {self.degradation!r}")


@dataclass
class SynthOutput:
    spec: SynthSpec
    clean_reference: Frame
    sequence: Sequence
    gt_hop_fields: dict[int, MotionField]
    gt_long_fields: dict[int, MotionField]


# ---------------------------------------------------------------------------
# Continuous texture
# ---------------------------------------------------------------------------

def _kernel_sigma(cutoff: float) -> float:
    return 1.0 / (2.0 * cutoff)


def _kernel_radius(sigma: float) -> int:
    return max(1, int(math.ceil(4.0 * sigma)))


def _gauss(d: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-0.5 * (d / sigma) ** 2)


def _lattice_block(seed: int, y_lo: int, y_hi: int, x_lo: int, x_hi: int) -> np.ndarray:
    """(H, W, 3) uniform noise addressed by absolute lattice position."""
    ys = np.arange(y_lo, y_hi)
    xs = np.arange(x_lo, x_hi)
    gy = np.repeat(ys, len(xs))
    gx = np.tile(xs, len(ys))
    planes = [rng.lattice_uniform(seed, gy, gx, c).reshape(len(ys), len(xs))
              for c in range(3)]
    return np.stack(planes, axis=2)


def _eval_separable(lattice: np.ndarray, lat_origin: tuple[int, int],
                    width: int, height: int, offset: tuple[float, float],
                    sigma: float) -> np.ndarray:
    """Texture at (x - ox, y - oy) for the integer grid, via separable taps."""
    radius = _kernel_radius(sigma)
    ox, oy = offset
    mx, my = math.floor(ox), math.floor(oy)
    fx, fy = ox - mx, oy - my
    taps = np.arange(-radius, radius + 2)
    wx = _gauss(taps - fx, sigma)
    wy = _gauss(taps - fy, sigma)
    oy0, ox0 = lat_origin

    # T(x - o) = sum_t g(t - frac(o)) * L(x - floor(o) - t), per axis
    rows_needed = np.arange(height) - my
    cols_needed = np.arange(width) - mx
    acc_x = np.zeros((lattice.shape[0], width, 3))
    for i, t in enumerate(taps):
        cols = cols_needed - t - ox0
        acc_x += wx[i] * lattice[:, cols, :]
    out = np.zeros((height, width, 3))
    for i, t in enumerate(taps):
        rows = rows_needed - t - oy0
        out += wy[i] * acc_x[rows, :, :]
    return out


def _eval_general(lattice: np.ndarray, lat_origin: tuple[int, int],
                  px: np.ndarray, py: np.ndarray, sigma: float) -> np.ndarray:
    """Texture at arbitrary per-pixel coordinates (tap-sum evaluation)."""
    radius = _kernel_radius(sigma)
    oy0, ox0 = lat_origin
    bx = np.floor(px).astype(np.int64)
    by = np.floor(py).astype(np.int64)
    rx = px - bx
    ry = py - by
    taps = np.arange(-radius, radius + 2)
    wx = [_gauss(rx - t, sigma) for t in taps]
    wy = [_gauss(ry - t, sigma) for t in taps]
    out = np.zeros(px.shape + (3,))
    for ai, a in enumerate(taps):
        cols = bx + a - ox0
        row_acc = np.zeros_like(out)
        for bi, b in enumerate(taps):
            rows = by + b - oy0
            row_acc += wy[bi][:, :, None] * lattice[rows, cols, :]
        out += wx[ai][:, :, None] * row_acc
    return out


def texture(seed: int, size: tuple[int, int], cutoff: float) -> Frame:
    """Band-limited random RGB texture, normalized per channel to [0.1, 0.9]."""
    if not 0.0 < cutoff <= 1.0:
        raise ValueError("cutoff must be in (0, 1]")
    w, h = size
    sigma = _kernel_sigma(cutoff)
    radius = _kernel_radius(sigma)
    pad = radius + 2
    lattice = _lattice_block(seed, -pad, h + pad, -pad, w + pad)
    raw = _eval_separable(lattice, (-pad, -pad), w, h, (0.0, 0.0), sigma)
    scale, shift = _normalization(raw)
    return Frame((raw * scale + shift).astype(np.float32))


def _normalization(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = raw.min(axis=(0, 1))
    hi = raw.max(axis=(0, 1))
    span = np.where(hi > lo, hi - lo, 1.0)
    scale = 0.8 / span
    shift = 0.1 - lo * scale
    # constant channels map to mid-gray
    shift = np.where(hi > lo, shift, 0.5 - lo * scale)
    return scale, shift


# ---------------------------------------------------------------------------
# Motion transforms and ground-truth fields
# ---------------------------------------------------------------------------

def _cumulative_offset(model: MotionModel, j: int) -> tuple[float, float]:
    if isinstance(model, Constant):
        return (model.v[0] * j, model.v[1] * j)
    if isinstance(model, Drift):
        return (model.v0[0] * j + 0.5 * model.accel[0] * j * j,
                model.v0[1] * j + 0.5 * model.accel[1] * j * j)
    raise TypeError(f"not a translation model: {model}")


def _is_translation(model: MotionModel) -> bool:
    return isinstance(model, (Constant, Drift))


def _rotation_displacement(center: tuple[float, float], deg: float,
                           width: int, height: int) -> np.ndarray:
    """d(x) = R_deg(x - c) - (x - c) on the pixel grid."""
    cx, cy = center
    th = math.radians(deg)
    cos_t, sin_t = math.cos(th), math.sin(th)
    gy, gx = np.mgrid[0:height, 0:width].astype(np.float64)
    rx, ry = gx - cx, gy - cy
    dx = cos_t * rx - sin_t * ry - rx
    dy = sin_t * rx + cos_t * ry - ry
    return np.stack([dx, dy], axis=2)


def _gt_field(spec: SynthSpec, from_j: int, onto_j: int) -> MotionField:
    """Backward field on frame `onto_j`'s grid aligning frame `from_j` onto it."""
    w, h = spec.size
    if _is_translation(spec.motion):
        cf = _cumulative_offset(spec.motion, from_j)
        co = _cumulative_offset(spec.motion, onto_j)
        d = np.broadcast_to(
            np.asarray([cf[0] - co[0], cf[1] - co[1]], dtype=np.float32),
            (h, w, 2)).copy()
        return MotionField(d)
    model: Rotation = spec.motion
    deg = model.omega_deg * (from_j - onto_j)
    return MotionField(_rotation_displacement(model.center, deg, w, h))


def _frame_coords(spec: SynthSpec, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Texture coordinates for frame j's pixel grid (rotation models)."""
    model: Rotation = spec.motion
    w, h = spec.size
    cx, cy = model.center
    th = math.radians(-model.omega_deg * j)
    cos_t, sin_t = math.cos(th), math.sin(th)
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    rx, ry = gx - cx, gy - cy
    return (cos_t * rx - sin_t * ry + cx, sin_t * rx + cos_t * ry + cy)


def _check_displacement_bound(spec: SynthSpec) -> None:
    w, h = spec.size
    total = w * h
    for k in range(1, spec.n_side + 1):
        for kk in (k, -k):
            f = _gt_field(spec, kk, 0)
            gy, gx = np.mgrid[0:h, 0:w]
            sx = gx + f.dx
            sy = gy + f.dy
            inside = ((sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)).sum()
            if inside < 0.75 * total:
                raise ValueError(
                    f"motion leaves only {inside / total:.0%} of frame {kk} "
                    "in-frame (need >= 75%)")


def _degrade(frame: Frame, spec: SynthSpec, j: int) -> Frame:
    if spec.degradation == "none":
        return frame
    if spec.degradation == "noise":
        child = rng.derive_seed(spec.noise.seed, j + 1024)
        return add_gaussian_noise(frame, NoiseSpec(spec.noise.sigma, child))
    r = spec.blur_radius
    padded = np.pad(frame.data, ((r, r), (r, r), (0, 0)), mode="edge")
    acc = np.zeros_like(frame.data, dtype=np.float64)
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            acc += padded[dy:dy + frame.height, dx:dx + frame.width]
    return Frame((acc / (2 * r + 1) ** 2).astype(np.float32))


def generate(spec: SynthSpec) -> SynthOutput:
    """Deterministically build the degraded sequence plus exact GT fields."""
    _check_displacement_bound(spec)
    w, h = spec.size
    n = spec.n_side
    sigma = _kernel_sigma(spec.texture_cutoff)
    radius = _kernel_radius(sigma)

    # lattice must cover every frame's sample positions plus kernel support
    if _is_translation(spec.motion):
        offs = [_cumulative_offset(spec.motion, j) for j in range(-n, n + 1)]
        max_off = max(max(abs(o[0]), abs(o[1])) for o in offs)
    else:
        max_off = float(np.abs(_gt_field(spec, n, 0).data).max()) + 1
        max_off = max(max_off, float(np.abs(_gt_field(spec, -n, 0).data).max()) + 1)
    pad = radius + 2 + int(math.ceil(max_off))
    lattice = _lattice_block(spec.texture_seed, -pad, h + pad, -pad, w + pad)
    origin = (-pad, -pad)

    ref_raw = _eval_separable(lattice, origin, w, h, (0.0, 0.0), sigma)
    scale, shift = _normalization(ref_raw)

    clean: dict[int, Frame] = {}
    for j in range(-n, n + 1):
        if j == 0:
            raw = ref_raw
        elif _is_translation(spec.motion):
            raw = _eval_separable(lattice, origin, w, h,
                                  _cumulative_offset(spec.motion, j), sigma)
        else:
            px, py = _frame_coords(spec, j)
            raw = _eval_general(lattice, origin, px, py, sigma)
        clean[j] = Frame((raw * scale + shift).astype(np.float32))

    frames = [_degrade(clean[j], spec, j) for j in range(-n, n + 1)]
    hop: dict[int, MotionField] = {}
    long: dict[int, MotionField] = {}
    for k in range(1, n + 1):
        hop[k] = _gt_field(spec, k, k - 1)
        hop[-k] = _gt_field(spec, -k, -(k - 1))
        long[k] = _gt_field(spec, k, 0)
        long[-k] = _gt_field(spec, -k, 0)

    return SynthOutput(spec=spec, clean_reference=clean[0],
                       sequence=Sequence(frames),
                       gt_hop_fields=hop, gt_long_fields=long)


# ---------------------------------------------------------------------------
# File output
# ---------------------------------------------------------------------------

def _motion_label(model: MotionModel) -> str:
    if isinstance(model, Constant):
        return f"const:{model.v[0]:g},{model.v[1]:g}"
    if isinstance(model, Drift):
        return (f"drift:{model.v0[0]:g},{model.v0[1]:g},"
                f"{model.accel[0]:g},{model.accel[1]:g}")
    return f"rot:{model.center[0]:g},{model.center[1]:g},{model.omega_deg:g}"


def write_outputs(out: SynthOutput, out_dir: str) -> str:
    """Write PNG frames, hop-field MFLD files and a manifest; returns its path."""
    os.makedirs(out_dir, exist_ok=True)
    spec = out.spec
    n = spec.n_side
    lines = [
        f"size = {spec.size[0]}x{spec.size[1]}",
        f"n = {n}",
        f"motion = {_motion_label(spec.motion)}",
        f"texture_seed = {spec.texture_seed}",
        f"texture_cutoff = {spec.texture_cutoff:g}",
        f"sigma = {spec.noise.sigma:g}",
        f"noise_seed = {spec.noise.seed}",
        f"degradation = {spec.degradation}",
    ]
    save_frame(out.clean_reference, os.path.join(out_dir, "clean.png"))
    lines.append("clean_reference = clean.png")
    for idx, j in enumerate(range(-n, n + 1)):
        name = f"frame_{idx:03d}.png"
        save_frame(out.sequence.frame(j).rgb(), os.path.join(out_dir, name))
        lines.append(f"frame_{j} = {name}")
    for j in sorted(out.gt_hop_fields):
        tag = f"p{j}" if j > 0 else f"m{-j}"
        name = f"gt_hop_{tag}.mfld"
        save_field(out.gt_hop_fields[j], os.path.join(out_dir, name))
        lines.append(f"hop_{j} = {name}")
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return manifest
