"""Dense motion estimation: exhaustive block matching with optional prior,
bilinear lift to the pixel grid, and pyramidal Lucas-Kanade subpixel polish.

Fields use the backward-mapping convention: aligned(x, y) = source(x+dx, y+dy),
with the field living on the target frame's grid.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .frame import Frame
from .interp import bilinear_sample, box_window_sum, interp1d_along_axis

_MFLD_MAGIC = b"MFLD"


@dataclass
class MotionField:
    """Per-pixel (dx, dy) displacement map, shape (H, W, 2)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ValueError(f"motion field must be (H, W, 2), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("motion field contains non-finite components")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dx(self) -> np.ndarray:
        return self.data[:, :, 0]

    @property
    def dy(self) -> np.ndarray:
        return self.data[:, :, 1]

    def max_abs(self) -> float:
        return float(np.abs(self.data).max())

    @staticmethod
    def zero(height: int, width: int) -> "MotionField":
        return MotionField(np.zeros((height, width, 2), dtype=np.float32))


def save_field(field: MotionField, path: str) -> None:
    """Serialize as magic 'MFLD', u32 width, u32 height, then little-endian
    f32 dx plane and dy plane (row-major)."""
    with open(path, "wb") as fh:
        fh.write(_MFLD_MAGIC)
        fh.write(struct.pack("<II", field.width, field.height))
        fh.write(field.dx.astype("<f4").tobytes())
        fh.write(field.dy.astype("<f4").tobytes())


def load_field(path: str) -> MotionField:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MFLD_MAGIC:
        raise ValueError(f"{path}: bad magic, not an MFLD file")
    w, h = struct.unpack("<II", blob[4:12])
    need = 12 + 2 * 4 * w * h
    if len(blob) != need:
        raise ValueError(f"{path}: expected {need} bytes, got {len(blob)}")
    plane = np.frombuffer(blob, "<f4", 2 * w * h, 12)
    dx = plane[: w * h].reshape(h, w)
    dy = plane[w * h:].reshape(h, w)
    return MotionField(np.stack([dx, dy], axis=2))


@dataclass
class MotionParams:
    block_size: int = 8
    search_radius: int = 12
    cost: str = "sad"
    lk_iterations: int = 5
    lk_window: int = 7
    pyramid_levels: int = 3
    lk_max_adjust: float = 2.0  # cap on total LK correction per component, px
    lk_min_eig: float = 1e-3    # structure-tensor gate for accepting LK steps

    def __post_init__(self) -> None:
        if self.block_size < 4:
            raise ValueError("block_size must be >= 4")
        if self.search_radius < 1:
            raise ValueError("search_radius must be >= 1")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.lk_window < 3 or self.lk_window % 2 == 0:
            raise ValueError("lk_window must be odd and >= 3")
        if self.cost != "sad":
            raise ValueError(f"unsupported cost {self.cost!r}")

    def scaled_radius(self, factor: int) -> "MotionParams":
        p = MotionParams(**vars(self))
        p.search_radius = self.search_radius * max(1, factor)
        return p


@dataclass
class BlockSearchStats:
    """Integer-stage result on the block grid, kept for diagnostics."""

    origins_y: np.ndarray
    origins_x: np.ndarray
    displacements: np.ndarray  # (nby, nbx, 2) winning (dx, dy), may be fractional
    costs: np.ndarray          # (nby, nbx) winning mean SAD
    prior_costs: np.ndarray | None  # (nby, nbx) SAD of the prior's block median
    prior_medians: np.ndarray | None

    @property
    def mean_cost(self) -> float:
        return float(self.costs.mean())


def _block_origins(size: int, bs: int) -> np.ndarray:
    if size < bs:
        raise ValueError(f"frame dimension {size} smaller than block_size {bs}")
    origins = list(range(0, size - bs + 1, bs))
    if origins[-1] != size - bs:
        origins.append(size - bs)
    return np.asarray(origins, dtype=np.int64)


def _candidate_order(radius: int) -> np.ndarray:
    """All displacements in the square window, sorted so that iterating with a
    strict-improvement update implements the tie-break rule: smaller magnitude
    wins, then lexicographic (dy, dx)."""
    span = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    cand = np.stack([dx.ravel(), dy.ravel()], axis=1)
    order = np.lexsort((cand[:, 0], cand[:, 1], cand[:, 0] ** 2 + cand[:, 1] ** 2))
    return cand[order]


def _block_sums(cost_map: np.ndarray, oy: np.ndarray, ox: np.ndarray,
                bs: int) -> np.ndarray:
    h, w = cost_map.shape
    if (len(oy) * bs == h and len(ox) * bs == w
            and oy[-1] == h - bs and ox[-1] == w - bs):
        return cost_map.reshape(len(oy), bs, len(ox), bs).sum(axis=(1, 3))
    cs = np.pad(cost_map.cumsum(0).cumsum(1), ((1, 0), (1, 0)))
    return (cs[np.ix_(oy + bs, ox + bs)] - cs[np.ix_(oy + bs, ox)]
            - cs[np.ix_(oy, ox + bs)] + cs[np.ix_(oy, ox)])


def block_cost(source: Frame, target: Frame, block_origin: tuple[int, int],
               displacement: tuple[float, float], params: MotionParams) -> float:
    """Mean absolute difference over one block; source reads clamp to edges.

    Fractional displacements are evaluated with bilinear sampling.
    """
    x0, y0 = block_origin
    bs = params.block_size
    if not (0 <= x0 <= target.width - bs and 0 <= y0 <= target.height - bs):
        raise ValueError(f"block origin {block_origin} out of bounds")
    if not source.same_shape(target):
        raise ValueError("source/target dimensions differ")
    ys, xs = np.mgrid[y0:y0 + bs, x0:x0 + bs]
    dx, dy = displacement
    patch = bilinear_sample(source.data, xs + float(dx), ys + float(dy))
    tgt = target.data[y0:y0 + bs, x0:x0 + bs]
    return float(np.abs(patch.astype(np.float64) - tgt).mean())


def _sad_maps_for_shift(src: np.ndarray, tgt: np.ndarray, dx: int, dy: int,
                        pad: int, padded: np.ndarray) -> np.ndarray:
    h, w = tgt.shape[:2]
    shifted = padded[pad + dy: pad + dy + h, pad + dx: pad + dx + w]
    return np.abs(shifted.astype(np.float64) - tgt).sum(axis=2)


def _uniform_window_search(src: np.ndarray, tgt: np.ndarray, bs: int, radius: int,
                           oy: np.ndarray, ox: np.ndarray,
                           center: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive search with the same integer window center for every block.

    Returns (displacements (nby, nbx, 2), mean costs (nby, nbx)).
    """
    cx, cy = center
    pad = radius + max(abs(cx), abs(cy))
    padded = np.pad(src, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
    n = bs * bs * src.shape[2]
    best_cost = np.full((len(oy), len(ox)), np.inf)
    best_d = np.zeros((len(oy), len(ox), 2), dtype=np.float64)
    for ddx, ddy in _candidate_order(radius):
        cm = _sad_maps_for_shift(src, tgt, cx + ddx, cy + ddy, pad, padded)
        cost = _block_sums(cm, oy, ox, bs) / n
        better = cost < best_cost
        if better.any():
            best_cost = np.where(better, cost, best_cost)
            best_d[better] = (cx + ddx, cy + ddy)
    return best_d, best_cost


def _blockwise_search(src: np.ndarray, tgt: np.ndarray, bs: int, radius: int,
                      oy: np.ndarray, ox: np.ndarray,
                      centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-block exhaustive search around per-block integer window centers."""
    h, w, c = src.shape
    n = bs * bs * c
    cand = _candidate_order(radius)
    best_cost = np.zeros((len(oy), len(ox)))
    best_d = np.zeros((len(oy), len(ox), 2), dtype=np.float64)
    maxc = int(np.abs(centers).max())
    pad = radius + maxc
    padded = np.pad(src, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(padded, (bs, bs), axis=(0, 1))
    for bi, y0 in enumerate(oy):
        for bj, x0 in enumerate(ox):
            cx, cy = centers[bi, bj]
            tblock = tgt[y0:y0 + bs, x0:x0 + bs]
            # candidate (cx+ddx, cy+ddy) reads window at origin + center + dd
            rows = y0 + pad + cy + cand[:, 1]
            cols = x0 + pad + cx + cand[:, 0]
            patches = win[rows, cols]  # (ncand, C, bs, bs)
            diffs = np.abs(patches.astype(np.float64)
                           - tblock.transpose(2, 0, 1)).sum(axis=(1, 2, 3)) / n
            k = int(np.argmin(diffs))  # first minimum = canonical tie-break
            best_cost[bi, bj] = diffs[k]
            best_d[bi, bj] = (cx + cand[k, 0], cy + cand[k, 1])
    return best_d, best_cost


def _prior_medians(prior: MotionField, oy: np.ndarray, ox: np.ndarray,
                   bs: int) -> np.ndarray:
    med = np.zeros((len(oy), len(ox), 2))
    for bi, y0 in enumerate(oy):
        for bj, x0 in enumerate(ox):
            block = prior.data[y0:y0 + bs, x0:x0 + bs]
            med[bi, bj, 0] = np.median(block[:, :, 0])
            med[bi, bj, 1] = np.median(block[:, :, 1])
    return med


def _fractional_block_costs(src: np.ndarray, tgt: np.ndarray, oy: np.ndarray,
                            ox: np.ndarray, bs: int, disp: np.ndarray) -> np.ndarray:
    """Mean SAD of each block at its own (possibly fractional) displacement."""
    n = bs * bs * src.shape[2]
    out = np.zeros((len(oy), len(ox)))
    for bi, y0 in enumerate(oy):
        for bj, x0 in enumerate(ox):
            ys, xs = np.mgrid[y0:y0 + bs, x0:x0 + bs]
            patch = bilinear_sample(src, xs + disp[bi, bj, 0], ys + disp[bi, bj, 1])
            out[bi, bj] = np.abs(
                patch.astype(np.float64) - tgt[y0:y0 + bs, x0:x0 + bs]).sum() / n
    return out


def block_search(source: Frame, target: Frame, params: MotionParams,
                 prior: MotionField | None = None) -> BlockSearchStats:
    """Integer-stage exhaustive block matching.

    Without a prior the window is centered at zero. With a prior, each block's
    window is centered at the rounded block median of the prior, and the exact
    median vector is kept as an extra candidate, so the winning cost never
    exceeds the cost the prior scores on that block.
    """
    if not source.same_shape(target):
        raise ValueError("source/target dimensions differ")
    bs = params.block_size
    oy = _block_origins(target.height, bs)
    ox = _block_origins(target.width, bs)
    src, tgt = source.data, target.data

    if prior is None:
        disp, costs = _uniform_window_search(src, tgt, bs, params.search_radius,
                                             oy, ox, (0, 0))
        return BlockSearchStats(oy, ox, disp, costs, None, None)

    if prior.data.shape[:2] != (target.height, target.width):
        raise ValueError("prior dimensions differ from target")
    med = _prior_medians(prior, oy, ox, bs)
    centers = np.rint(med).astype(np.int64)
    if (centers == centers[0, 0]).all():
        disp, costs = _uniform_window_search(src, tgt, bs, params.search_radius,
                                             oy, ox, tuple(centers[0, 0]))
    else:
        disp, costs = _blockwise_search(src, tgt, bs, params.search_radius,
                                        oy, ox, centers)
    prior_costs = _fractional_block_costs(src, tgt, oy, ox, bs, med)
    # prior median as extra candidate; ties keep the integer-stage winner
    take = prior_costs < costs
    disp = np.where(take[:, :, None], med, disp)
    costs = np.where(take, prior_costs, costs)
    return BlockSearchStats(oy, ox, disp, costs, prior_costs, med)


def _lift_to_pixels(stats: BlockSearchStats, height: int, width: int,
                    bs: int) -> np.ndarray:
    cy = stats.origins_y + (bs - 1) / 2.0
    cx = stats.origins_x + (bs - 1) / 2.0
    field = interp1d_along_axis(stats.displacements, cy, np.arange(height), axis=0)
    field = interp1d_along_axis(field, cx, np.arange(width), axis=1)
    return field


def _downsample2(arr: np.ndarray) -> np.ndarray:
    h, w = arr.shape[:2]
    h2, w2 = h // 2 * 2, w // 2 * 2
    a = arr[:h2, :w2]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def _resize_bilinear(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    ys = (np.arange(height) + 0.5) * (arr.shape[0] / height) - 0.5
    xs = (np.arange(width) + 0.5) * (arr.shape[1] / width) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return bilinear_sample(arr, gx, gy)


def _lk_refine(src: np.ndarray, tgt: np.ndarray, init: np.ndarray,
               params: MotionParams) -> np.ndarray:
    """Pyramidal Lucas-Kanade polish of a dense field (multi-channel SSD)."""
    levels = 1
    h, w = tgt.shape[:2]
    while (levels < params.pyramid_levels
           and min(h, w) // (2 ** levels) >= 2 * params.lk_window):
        levels += 1

    src_pyr, tgt_pyr = [src], [tgt]
    for _ in range(levels - 1):
        src_pyr.append(_downsample2(src_pyr[-1]))
        tgt_pyr.append(_downsample2(tgt_pyr[-1]))

    inits = [init.astype(np.float64)]
    for _ in range(levels - 1):
        inits.append(_downsample2(inits[-1]) * 0.5)

    field = inits[-1].copy()
    for level in range(levels - 1, -1, -1):
        s, t = src_pyr[level], tgt_pyr[level]
        lh, lw = t.shape[:2]
        gy_grid, gx_grid = np.mgrid[0:lh, 0:lw].astype(np.float64)
        budget = params.lk_max_adjust / (2 ** level)
        win = params.lk_window
        warped = bilinear_sample(s, gx_grid + field[:, :, 0],
                                 gy_grid + field[:, :, 1]).astype(np.float64)
        err = t - warped
        energy = box_window_sum((err * err).sum(axis=2), win)
        for _ in range(params.lk_iterations):
            # symmetric gradients (average of warped source and target) cut
            # the bias when the warped source is blurrier than the target
            avg = 0.5 * (warped + t)
            gx = np.gradient(avg, axis=1)
            gy = np.gradient(avg, axis=0)
            a11 = box_window_sum((gx * gx).sum(axis=2), win)
            a12 = box_window_sum((gx * gy).sum(axis=2), win)
            a22 = box_window_sum((gy * gy).sum(axis=2), win)
            b1 = box_window_sum((gx * err).sum(axis=2), win)
            b2 = box_window_sum((gy * err).sum(axis=2), win)
            # gate on the structure tensor's smaller eigenvalue so flat
            # regions keep the block-matching answer instead of wandering
            half_tr = 0.5 * (a11 + a22)
            min_eig = half_tr - np.sqrt(np.maximum(
                (0.5 * (a11 - a22)) ** 2 + a12 * a12, 0.0))
            ok = min_eig > params.lk_min_eig
            det = np.where(ok, a11 * a22 - a12 * a12, 1.0)
            sx = np.where(ok, np.clip((a22 * b1 - a12 * b2) / det, -1.0, 1.0), 0.0)
            sy = np.where(ok, np.clip((a11 * b2 - a12 * b1) / det, -1.0, 1.0), 0.0)
            proposed = field.copy()
            proposed[:, :, 0] += sx
            proposed[:, :, 1] += sy
            proposed = np.clip(proposed, inits[level] - budget,
                               inits[level] + budget)
            new_warped = bilinear_sample(s, gx_grid + proposed[:, :, 0],
                                         gy_grid + proposed[:, :, 1]
                                         ).astype(np.float64)
            new_err = t - new_warped
            new_energy = box_window_sum((new_err * new_err).sum(axis=2), win)
            # keep a step only where it lowers the windowed error energy
            accept = new_energy < energy
            field = np.where(accept[:, :, None], proposed, field)
            warped = bilinear_sample(s, gx_grid + field[:, :, 0],
                                     gy_grid + field[:, :, 1]).astype(np.float64)
            err = t - warped
            energy = box_window_sum((err * err).sum(axis=2), win)
        if level > 0:
            nh, nw = tgt_pyr[level - 1].shape[:2]
            field = _resize_bilinear(field, nh, nw).astype(np.float64) * 2.0

    lo = init - params.lk_max_adjust
    hi = init + params.lk_max_adjust
    return np.clip(field, lo, hi)


def _window_warp_energy(src: np.ndarray, tgt: np.ndarray, field: np.ndarray,
                        window: int) -> np.ndarray:
    h, w = tgt.shape[:2]
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    warped = bilinear_sample(src, gx + field[:, :, 0], gy + field[:, :, 1])
    err = tgt.astype(np.float64) - warped
    return box_window_sum((err * err).sum(axis=2), window)


def estimate_with_stats(source: Frame, target: Frame, params: MotionParams,
                        prior: MotionField | None = None,
                        ) -> tuple[MotionField, BlockSearchStats]:
    """Full estimate returning the integer-stage diagnostics as well."""
    stats = block_search(source, target, params, prior)
    init = _lift_to_pixels(stats, target.height, target.width, params.block_size)
    refined = _lk_refine(source.data, target.data, init, params)
    if prior is not None:
        # prior-as-candidate extends to the subpixel stage: keep the prior
        # wherever the re-estimate does not strictly lower the local warp
        # error on the current pair
        e_ref = _window_warp_energy(source.data, target.data, refined,
                                    params.lk_window)
        e_pri = _window_warp_energy(source.data, target.data,
                                    prior.data.astype(np.float64),
                                    params.lk_window)
        better = (e_ref < e_pri)[:, :, None]
        refined = np.where(better, refined, prior.data)
    return MotionField(refined.astype(np.float32)), stats


def estimate(source: Frame, target: Frame, params: MotionParams,
             prior: MotionField | None = None) -> MotionField:
    """Dense backward motion from target grid into source (see module doc)."""
    field, _ = estimate_with_stats(source, target, params, prior)
    return field
