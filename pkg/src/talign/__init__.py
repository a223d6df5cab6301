"""Multi-frame video alignment and fusion toolkit.

Aligns 2N+1 frame windows onto the central reference with independent,
progressive, or iterative sub-alignment schedules, fuses the aligned frames
with non-parametric adaptive re-weighting, and ships a synthetic harness
with exact ground-truth motion for quantitative evaluation.
"""

from .frame import (Frame, NoiseSpec, Sequence, add_gaussian_noise, load_frame,
                    load_sequence, rgb_to_luma, save_frame, to_descriptor)
from .fusion import (FusionParams, accuracy_reweight, arw_fuse,
                     consistency_maps, mean_fuse)
from .metrics import Metrics, endpoint_error, psnr, ssim, temporal_profile
from .motion import (MotionField, MotionParams, block_cost, block_search,
                     estimate, estimate_with_stats, load_field, save_field)
from .schedule import (AlignmentOutput, ExecutionPlan, ScheduleKind,
                       SubAlignmentExec, plan, run)
from .synth import (Constant, Drift, Rotation, SynthOutput, SynthSpec,
                    generate, texture, write_outputs)
from .warp import backward_warp, compose_fields

__version__ = "0.1.0"

__all__ = [
    "Frame", "NoiseSpec", "Sequence", "add_gaussian_noise", "load_frame",
    "load_sequence", "rgb_to_luma", "save_frame", "to_descriptor",
    "FusionParams", "accuracy_reweight", "arw_fuse", "consistency_maps",
    "mean_fuse", "Metrics", "endpoint_error", "psnr", "ssim",
    "temporal_profile", "MotionField", "MotionParams", "block_cost",
    "block_search", "estimate", "estimate_with_stats", "load_field",
    "save_field", "AlignmentOutput", "ExecutionPlan", "ScheduleKind",
    "SubAlignmentExec", "plan", "run", "Constant", "Drift", "Rotation",
    "SynthOutput", "SynthSpec", "generate", "texture", "write_outputs",
    "backward_warp", "compose_fields", "__version__",
]
