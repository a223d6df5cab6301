"""Backward warping and motion-field composition."""

from __future__ import annotations

import numpy as np

from .frame import Frame
from .interp import bilinear_sample
from .motion import MotionField


def _check_dims(a_shape: tuple[int, int], b_shape: tuple[int, int]) -> None:
    if a_shape != b_shape:
        raise ValueError(f"dimension mismatch: {a_shape} vs {b_shape}")


def backward_warp(source: Frame, field: MotionField) -> Frame:
    """out(x, y) = bilinear sample of source at (x+dx, y+dy), clamped to edges."""
    _check_dims((source.height, source.width), (field.height, field.width))
    gy, gx = np.mgrid[0:source.height, 0:source.width].astype(np.float64)
    out = bilinear_sample(source.data, gx + field.dx, gy + field.dy)
    return Frame(out)


def compose_fields(outer: MotionField, inner: MotionField) -> MotionField:
    """Total displacement of warping by `outer` then by `inner`.

    `inner` maps the reference grid toward the intermediate frame and `outer`
    maps the intermediate toward the far frame:
    result(x) = inner(x) + outer sampled at (x + inner(x)).
    """
    _check_dims((outer.height, outer.width), (inner.height, inner.width))
    gy, gx = np.mgrid[0:inner.height, 0:inner.width].astype(np.float64)
    sampled = bilinear_sample(outer.data, gx + inner.dx, gy + inner.dy)
    return MotionField(inner.data + sampled)
