"""Alignment schedules: independent, progressive and iterative execution of
sub-alignments with memoized, refinable motion fields.

A sub-alignment a_i maps frame i onto frame i-1 (sign = temporal side); the
long-range alignment A_k chains hops k..1 to land frame k on the reference.
The three schedules differ in how often each hop is estimated:

  - independent: one direct frame-to-reference estimate per neighbor, with
    the search radius scaled by |k|;
  - progressive: each hop estimated once, on the raw adjacent pair; chains
    re-warp the carried frame hop by hop (resampling error accumulates);
  - iterative: like progressive, but every time a chain revisits hop i the
    hop is re-estimated against the actual carried frame, using the stored
    field as a prior (the refinement), so accumulated misalignment can be
    corrected.

With priors disabled, the iterative executor skips re-estimation and keeps
each hop's first field, which reproduces the progressive schedule bit for
bit while still executing the full plan.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

import numpy as np

from .frame import Frame, Sequence
from .motion import (BlockSearchStats, MotionField, MotionParams,
                     _fractional_block_costs, _prior_medians, _block_origins,
                     estimate_with_stats)
from .warp import backward_warp


class ScheduleKind(enum.Enum):
    INDEPENDENT = "independent"
    PROGRESSIVE = "progressive"
    ITERATIVE = "iterative"

    @staticmethod
    def parse(name: str) -> "ScheduleKind":
        try:
            return ScheduleKind(name.lower())
        except ValueError:
            raise ValueError(f"unknown schedule {name!r}") from None


@dataclass(frozen=True)
class SubAlignmentExec:
    """One planned sub-alignment execution: hop i within alignment A_k,
    refinement counter t (1-based). Signs of i and k carry the temporal side."""

    i: int
    k: int
    t: int

    def __post_init__(self) -> None:
        if self.i == 0 or self.k == 0:
            raise ValueError("hop and alignment indices are nonzero")
        if (self.i > 0) != (self.k > 0):
            raise ValueError("hop and alignment must share a temporal side")
        if abs(self.i) > abs(self.k):
            raise ValueError("|i| must not exceed |k|")
        if self.t < 1:
            raise ValueError("refinement counter is 1-based")

    @property
    def side(self) -> int:
        return 1 if self.k > 0 else -1


@dataclass
class ExecutionPlan:
    kind: ScheduleKind
    n_side: int
    execs: list[SubAlignmentExec]

    def __len__(self) -> int:
        return len(self.execs)


def plan(kind: ScheduleKind, n_side: int) -> ExecutionPlan:
    """Build the ordered execution plan for one schedule.

    Per side: independent and progressive emit one execution per neighbor
    (2N total); iterative emits the triangular refinement pattern, k then
    k-1 .. 1 within each A_k, N(N+1) total.
    """
    if n_side < 1:
        raise ValueError("neighbor count must be >= 1")
    execs: list[SubAlignmentExec] = []
    for side in (1, -1):
        for k in range(1, n_side + 1):
            if kind is ScheduleKind.ITERATIVE:
                for i in range(k, 0, -1):
                    execs.append(SubAlignmentExec(side * i, side * k, k + 1 - i))
            else:
                execs.append(SubAlignmentExec(side * k, side * k, 1))
    return ExecutionPlan(kind, n_side, execs)


@dataclass
class ExecDiagnostic:
    side: int
    i: int
    k: int
    t: int
    cost: float
    epe: float | None = None
    block_costs: np.ndarray | None = None
    prior_block_costs: np.ndarray | None = None

    def line(self) -> str:
        epe = "na" if self.epe is None else f"{self.epe:.4f}"
        sign = "+" if self.side > 0 else "-"
        return (f"exec side={sign} i={abs(self.i)} k={abs(self.k)} "
                f"t={self.t} cost={self.cost:.6f} epe={epe}")


@dataclass
class SubAlignmentState:
    """Latest motion field and refinement count per hop index."""

    fields: dict[int, MotionField] = dc_field(default_factory=dict)
    counts: dict[int, int] = dc_field(default_factory=dict)

    def store(self, i: int, fld: MotionField) -> None:
        self.fields[i] = fld
        self.counts[i] = self.counts.get(i, 0) + 1


@dataclass
class AlignmentOutput:
    aligned: dict[int, Frame]
    final_fields: dict[int, MotionField]
    diagnostics: list[ExecDiagnostic]
    state: SubAlignmentState


def _diag_epe(fld: MotionField, gt: MotionField | None) -> float | None:
    if gt is None:
        return None
    crop = min(16, (min(fld.height, fld.width) - 2) // 2)
    diff = (fld.data - gt.data)[crop:-crop or None, crop:-crop or None]
    return float(np.sqrt((diff.astype(np.float64) ** 2).sum(axis=2)).mean())


def _stored_field_cost(source: Frame, target: Frame, fld: MotionField,
                       params: MotionParams) -> tuple[float, np.ndarray]:
    """Mean block cost the stored field scores on a pair (for reuse execs)."""
    oy = _block_origins(target.height, params.block_size)
    ox = _block_origins(target.width, params.block_size)
    med = _prior_medians(fld, oy, ox, params.block_size)
    costs = _fractional_block_costs(source.data, target.data, oy, ox,
                                    params.block_size, med)
    return float(costs.mean()), costs


def run(sequence: Sequence, kind: ScheduleKind, params: MotionParams,
        use_priors: bool = True,
        gt_hop_fields: dict[int, MotionField] | None = None,
        keep_block_costs: bool = False) -> AlignmentOutput:
    """Execute a schedule over a descriptor sequence.

    Estimation runs on whatever channels the sequence carries (>= 3, e.g.
    the 5-channel matching descriptor); aligned RGB is the first three
    channels of the aligned output. `use_priors` only affects the iterative
    schedule, as described in the module docstring. When ground-truth hop
    fields are supplied, per-exec endpoint errors land in the diagnostics.
    """
    if sequence.reference.channels < 3:
        raise ValueError("alignment needs frames with >= 3 channels")
    n = sequence.n_side
    the_plan = plan(kind, n)
    state = SubAlignmentState()
    aligned: dict[int, Frame] = {}
    final_fields: dict[int, MotionField] = {}
    diags: list[ExecDiagnostic] = []

    if kind is ScheduleKind.INDEPENDENT:
        for ex in the_plan.execs:
            k = ex.k
            src = sequence.frame(k)
            fld, stats = estimate_with_stats(
                src, sequence.reference, params.scaled_radius(abs(k)))
            state.store(k, fld)
            final_fields[k] = fld
            aligned[k] = backward_warp(src, fld)
            gt = (gt_hop_fields or {}).get(k) if abs(k) == 1 else None
            diags.append(_make_diag(ex, stats, fld, gt, keep_block_costs))
        return AlignmentOutput(aligned, final_fields, diags, state)

    # chained schedules share the executor; they differ in re-estimation
    for side in (1, -1):
        for k_abs in range(1, n + 1):
            k = side * k_abs
            carried = sequence.frame(k)
            for i_abs in range(k_abs, 0, -1):
                i = side * i_abs
                t = k_abs + 1 - i_abs
                target = sequence.frame(i - side)
                gt = (gt_hop_fields or {}).get(i)
                if t == 1:
                    ex = SubAlignmentExec(i, k, t)
                    fld, stats = estimate_with_stats(carried, target, params)
                    state.store(i, fld)
                    diags.append(_make_diag(ex, stats, fld, gt, keep_block_costs))
                elif kind is ScheduleKind.ITERATIVE and use_priors:
                    ex = SubAlignmentExec(i, k, t)
                    fld, stats = estimate_with_stats(carried, target, params,
                                                     prior=state.fields[i])
                    state.store(i, fld)
                    diags.append(_make_diag(ex, stats, fld, gt, keep_block_costs))
                elif kind is ScheduleKind.ITERATIVE:
                    # priors disabled: the plan entry still runs, but keeps the
                    # stored first-branch field and only warps with it
                    fld = state.fields[i]
                    cost, costs = _stored_field_cost(carried, target, fld, params)
                    diags.append(ExecDiagnostic(
                        side, i, k, t, cost, _diag_epe(fld, gt),
                        block_costs=costs if keep_block_costs else None))
                else:
                    # progressive chains reuse stored fields silently; the
                    # re-warp is not a plan execution
                    fld = state.fields[i]
                carried = backward_warp(carried, fld)
                final_fields[i] = fld
            aligned[k] = carried
    return AlignmentOutput(aligned, final_fields, diags, state)


def _make_diag(ex: SubAlignmentExec, stats: BlockSearchStats, fld: MotionField,
               gt: MotionField | None, keep: bool) -> ExecDiagnostic:
    return ExecDiagnostic(
        ex.side, ex.i, ex.k, ex.t, stats.mean_cost, _diag_epe(fld, gt),
        block_costs=stats.costs if keep else None,
        prior_block_costs=stats.prior_costs if keep else None)
