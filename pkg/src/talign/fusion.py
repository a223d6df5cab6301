"""Non-parametric adaptive re-weighting and aggregation of aligned frames.

Two signals drive the fusion:
  - accuracy: cosine similarity between each 3x3 stencil tap of an aligned
    frame and the reference vector at the stencil center, softmax-normalized
    into per-pixel weights;
  - consistency: per-sample gain exp(alpha * squared deviation from the mean
    of the aligned frames), in (0, 1].
The final output is the consistency-normalized weighted mean of the gated,
accuracy-reweighted frames plus the reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame import Frame

_STENCIL = [(-1, -1), (-1, 0), (-1, 1),
            (0, -1), (0, 0), (0, 1),
            (1, -1), (1, 0), (1, 1)]  # (dy, dx), row-major


@dataclass
class FusionParams:
    alpha: float = -1.0
    norm_epsilon: float = 1e-8
    include_reference: bool = True
    reference_weight: float = 1.0
    consistency_reduce: str = "channelwise"  # or "pixelwise"
    avg_includes_reference: bool = False

    def __post_init__(self) -> None:
        if self.alpha > 0:
            raise ValueError("alpha must be <= 0")
        if self.norm_epsilon <= 0:
            raise ValueError("norm_epsilon must be > 0")
        if self.consistency_reduce not in ("channelwise", "pixelwise"):
            raise ValueError(
                f"unknown consistency_reduce {self.consistency_reduce!r}")


def _shifted(data: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """View of `data` displaced by (dy, dx) with clamp-border reads."""
    padded = np.pad(data, ((1, 1), (1, 1), (0, 0)), mode="edge")
    h, w = data.shape[:2]
    return padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]


def accuracy_reweight(reference: Frame, aligned: Frame,
                      params: FusionParams | None = None
                      ) -> tuple[np.ndarray, Frame]:
    """Per-pixel 3x3 softmax weights plus the re-weighted frame.

    Returns (weights, fused): weights has shape (H, W, 9) in row-major stencil
    order and each stencil sums to 1; fused(x) = sum_d W(d) * aligned(x + d).
    """
    params = params or FusionParams()
    if reference.data.shape != aligned.data.shape:
        raise ValueError("reference/aligned dimensions differ")
    if reference.channels < 2:
        raise ValueError("cosine similarity needs >= 2 channels")
    eps = params.norm_epsilon
    ref = reference.data.astype(np.float64)
    ref_unit = ref / (np.linalg.norm(ref, axis=2, keepdims=True) + eps)

    ali = aligned.data.astype(np.float64)
    sims = np.empty(ref.shape[:2] + (9,))
    taps = []
    for s, (dy, dx) in enumerate(_STENCIL):
        tap = _shifted(ali, dy, dx)
        taps.append(tap)
        tap_unit = tap / (np.linalg.norm(tap, axis=2, keepdims=True) + eps)
        sims[:, :, s] = (tap_unit * ref_unit).sum(axis=2)

    sims -= sims.max(axis=2, keepdims=True)
    w = np.exp(sims)
    w /= w.sum(axis=2, keepdims=True)

    fused = np.zeros_like(ali)
    for s in range(9):
        fused += w[:, :, s:s + 1] * taps[s]
    return w.astype(np.float32), Frame(fused.astype(np.float32))


def consistency_maps(aligned_set: list[Frame],
                     params: FusionParams | None = None,
                     reference: Frame | None = None) -> list[np.ndarray]:
    """Per-sample gains C_k = exp(alpha * (F_k - avg)^2) in (0, 1].

    The average runs over the aligned frames only, unless
    params.avg_includes_reference is set and a reference is supplied.
    With consistency_reduce="pixelwise" the squared deviation is summed over
    channels and the per-pixel gain is broadcast back to every channel.
    """
    params = params or FusionParams()
    if len(aligned_set) < 2:
        raise ValueError("need at least 2 aligned frames")
    shape = aligned_set[0].data.shape
    for f in aligned_set[1:]:
        if f.data.shape != shape:
            raise ValueError("aligned frames differ in shape")
    stack = [f.data.astype(np.float64) for f in aligned_set]
    avg_stack = list(stack)
    if params.avg_includes_reference:
        if reference is None:
            raise ValueError("avg_includes_reference requires a reference")
        if reference.data.shape != shape:
            raise ValueError("reference shape differs")
        avg_stack = avg_stack + [reference.data.astype(np.float64)]
    avg = np.mean(avg_stack, axis=0)

    out = []
    for data in stack:
        dev2 = (data - avg) ** 2
        if params.consistency_reduce == "pixelwise":
            dev2 = dev2.sum(axis=2, keepdims=True) * np.ones_like(dev2)
        out.append(np.exp(params.alpha * dev2))
    return out


def arw_fuse(reference: Frame, aligned_set: list[Frame],
             params: FusionParams | None = None
             ) -> tuple[Frame, dict]:
    """Adaptive re-weighted fusion of aligned frames with the reference.

    Per frame: accuracy-reweight, then gate by the consistency map; the output
    is (w_ref * F0 + sum_k C_k-gated frames) / (w_ref + sum_k C_k), elementwise.
    Diagnostics carry the per-frame mean consistency gain.
    """
    params = params or FusionParams()
    if not aligned_set:
        raise ValueError("empty aligned set")
    for f in aligned_set:
        if f.data.shape != reference.data.shape:
            raise ValueError("aligned/reference dimensions differ")
    gains = consistency_maps(aligned_set, params, reference=reference) \
        if len(aligned_set) >= 2 else [np.ones_like(aligned_set[0].data,
                                                    dtype=np.float64)]
    num = np.zeros(reference.data.shape, dtype=np.float64)
    den = np.zeros(reference.data.shape, dtype=np.float64)
    if params.include_reference:
        num += params.reference_weight * reference.data
        den += params.reference_weight
    mean_gain = []
    for f, c in zip(aligned_set, gains):
        _, rew = accuracy_reweight(reference, f, params)
        num += rew.data * c
        den += c
        mean_gain.append(float(c.mean()))
    fused = Frame((num / den).astype(np.float32))
    return fused, {"mean_consistency": mean_gain}


def mean_fuse(reference: Frame, aligned_set: list[Frame]) -> Frame:
    """Plain elementwise mean over {reference} | aligned_set."""
    for f in aligned_set:
        if f.data.shape != reference.data.shape:
            raise ValueError("aligned/reference dimensions differ")
    acc = reference.data.astype(np.float64).copy()
    for f in aligned_set:
        acc += f.data
    return Frame((acc / (1 + len(aligned_set))).astype(np.float32))
