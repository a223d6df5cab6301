"""Command-line interface: synthetic data generation, restoration, the
motion-magnitude benchmark, and metric evaluation.

Exit codes: 0 success, 2 input/validation error, 3 internal failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import rng
from .frame import (Frame, NoiseSpec, Sequence, load_frame, load_sequence,
                    rgb_to_luma, save_frame, to_descriptor)
from .fusion import FusionParams, arw_fuse, mean_fuse
from .metrics import endpoint_error, metric_line, psnr, ssim
from .motion import MotionField, MotionParams, load_field
from .schedule import AlignmentOutput, ScheduleKind, run as run_schedule
from .synth import (Constant, Drift, Rotation, SynthOutput, SynthSpec,
                    generate, write_outputs)
from .warp import compose_fields

# direction of the benchmark's constant-velocity motion; deliberately not
# axis-aligned so per-hop displacements have subpixel parts
_BENCH_ANGLE = math.atan2(1.0, 2.0)

CSV_HEADER = "bin,schedule,fusion,psnr_aligned,psnr_restored,epe_mean,epe_p90"


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except Exception:
        raise ValueError(f"bad size {text!r}, want WxH") from None


def _parse_motion(text: str):
    kind, _, rest = text.partition(":")
    try:
        vals = [float(x) for x in rest.split(",")] if rest else []
        if kind == "const" and len(vals) == 2:
            return Constant((vals[0], vals[1]))
        if kind == "drift" and len(vals) == 4:
            return Drift((vals[0], vals[1]), (vals[2], vals[3]))
        if kind == "rot" and len(vals) == 3:
            return Rotation((vals[0], vals[1]), vals[2])
    except ValueError:
        pass
    raise ValueError(
        f"bad motion {text!r}; want const:vx,vy | drift:vx,vy,ax,ay | rot:cx,cy,deg")


def parse_config(path: str) -> dict[str, str]:
    """Flat `key = value` file; '#' starts a comment."""
    if not os.path.exists(path):
        raise ValueError(f"no such config file: {path}")
    out: dict[str, str] = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value")
            key, _, val = line.partition("=")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _motion_params(args) -> MotionParams:
    return MotionParams(block_size=args.block_size,
                        search_radius=args.search_radius,
                        lk_iterations=args.lk_iterations,
                        lk_window=args.lk_window,
                        pyramid_levels=args.pyramid_levels)


def _fusion_params(args) -> FusionParams:
    return FusionParams(alpha=args.alpha,
                        reference_weight=args.reference_weight,
                        consistency_reduce=args.consistency_reduce)


def _add_motion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--block-size", type=int, default=8)
    p.add_argument("--search-radius", type=int, default=12)
    p.add_argument("--lk-iterations", type=int, default=5)
    p.add_argument("--lk-window", type=int, default=7)
    p.add_argument("--pyramid-levels", type=int, default=3)


def _add_fusion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=-1.0)
    p.add_argument("--reference-weight", type=float, default=1.0)
    p.add_argument("--consistency-reduce", default="channelwise",
                   choices=["channelwise", "pixelwise"])


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = SynthSpec(size=_parse_size(args.size), n_side=args.n,
                     motion=_parse_motion(args.motion),
                     texture_seed=args.seed,
                     texture_cutoff=args.cutoff,
                     noise=NoiseSpec(args.sigma, args.seed),
                     degradation=args.degradation if args.degradation != "auto"
                     else ("noise" if args.sigma > 0 else "none"),
                     blur_radius=args.blur_radius)
    out = generate(spec)
    manifest = write_outputs(out, args.out)
    print(manifest)
    return 0


# ---------------------------------------------------------------------------
# restore
# ---------------------------------------------------------------------------

def _restore_pipeline(seq: Sequence, args) -> tuple[Frame, AlignmentOutput]:
    desc = seq.map(lambda f: to_descriptor(f.rgb()))
    kind = ScheduleKind.parse(args.schedule)
    if args.no_prior and kind is not ScheduleKind.ITERATIVE:
        raise ValueError("--no-prior is only valid with --schedule iterative")
    result = run_schedule(desc, kind, _motion_params(args),
                          use_priors=not args.no_prior)
    aligned = [result.aligned[k] for k in sorted(result.aligned)]
    if args.fusion == "arw":
        fused, _ = arw_fuse(desc.reference, aligned, _fusion_params(args))
    else:
        fused = mean_fuse(desc.reference, aligned)
    return fused.rgb(), result


def cmd_restore(args) -> int:
    seq = load_sequence(args.input, args.kind)
    restored, result = _restore_pipeline(seq, args)
    if args.verbose:
        for d in result.diagnostics:
            print(d.line())
    if args.out:
        save_frame(restored, args.out)
    if args.gt:
        gt = load_frame(args.gt)
        print(metric_line("psnr_input", psnr(seq.reference.rgb(), gt)))
        print(metric_line("psnr", psnr(restored, gt)))
        print(metric_line("ssim", ssim(rgb_to_luma(restored), rgb_to_luma(gt))))
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _composed_field(out: AlignmentOutput, kind: ScheduleKind, k: int) -> MotionField:
    if kind is ScheduleKind.INDEPENDENT:
        return out.final_fields[k]
    side = 1 if k > 0 else -1
    total = out.final_fields[side]
    for j in range(2, abs(k) + 1):
        total = compose_fields(outer=out.final_fields[side * j], inner=total)
    return total


def _bench_cell(args, mag: float, seed_idx: int) -> dict:
    cell_tag = int(mag * 1000) * 10007 + seed_idx
    tex_seed = rng.derive_seed(args.seed, 2 * cell_tag)
    noise_seed = rng.derive_seed(args.seed, 2 * cell_tag + 1)
    v = (mag * math.cos(_BENCH_ANGLE), mag * math.sin(_BENCH_ANGLE))
    spec = SynthSpec(size=_parse_size(args.size), n_side=args.n,
                     motion=Constant(v), texture_seed=tex_seed,
                     texture_cutoff=args.cutoff,
                     noise=NoiseSpec(args.sigma, noise_seed),
                     degradation="noise" if args.sigma > 0 else "none")
    out = generate(spec)
    desc = out.sequence.map(lambda f: to_descriptor(f.rgb()))
    crop = 16
    ref = Frame(out.clean_reference.data[crop:-crop, crop:-crop])
    cell = {}
    for sched_name in args.schedules.split(","):
        kind = ScheduleKind.parse(sched_name)
        res = run_schedule(desc, kind, _motion_params(args))
        psnr_a, epes = [], []
        for k in sorted(res.aligned):
            a = Frame(res.aligned[k].data[crop:-crop, crop:-crop, :3])
            psnr_a.append(psnr(a, ref))
            comp = _composed_field(res, kind, k)
            e_mean, e_p90 = endpoint_error(comp, out.gt_long_fields[k], crop)
            epes.append((e_mean, e_p90))
        aligned = [res.aligned[k] for k in sorted(res.aligned)]
        for fus in args.fusions.split(","):
            if fus == "arw":
                fused, _ = arw_fuse(desc.reference, aligned, _fusion_params(args))
            elif fus == "mean":
                fused = mean_fuse(desc.reference, aligned)
            else:
                raise ValueError(f"unknown fusion {fus!r}")
            restored = Frame(fused.data[crop:-crop, crop:-crop, :3])
            cell[(sched_name, fus)] = (
                float(np.mean(psnr_a)), psnr(restored, ref),
                float(np.mean([e[0] for e in epes])),
                float(np.mean([e[1] for e in epes])))
    return cell


def cmd_bench(args) -> int:
    bins = [float(b) for b in args.bins.split(",")]
    if not bins or any(b <= 0 for b in bins):
        raise ValueError(f"invalid bins {args.bins!r}")
    jobs = [(mag, s) for mag in bins for s in range(args.seeds)]
    workers = int(os.environ.get("TA_THREADS", "0")) or min(4, os.cpu_count() or 1)
    results: dict[tuple[float, int], dict] = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(_bench_cell, args, mag, s): (mag, s)
                    for mag, s in jobs}
            for fut, key in futs.items():
                results[key] = fut.result()
    else:
        for mag, s in jobs:
            results[(mag, s)] = _bench_cell(args, mag, s)

    rows = []
    for mag in bins:
        for sched in args.schedules.split(","):
            for fus in args.fusions.split(","):
                cells = [results[(mag, s)][(sched, fus)]
                         for s in range(args.seeds)]
                agg = np.mean(np.asarray(cells), axis=0)
                rows.append((mag, sched, fus) + tuple(agg))

    if args.format == "csv":
        print(CSV_HEADER)
        for r in rows:
            print(f"{r[0]:g},{r[1]},{r[2]},{r[3]:.4f},{r[4]:.4f},{r[5]:.4f},{r[6]:.4f}")
    else:
        print(f"{'bin':>5} {'schedule':>12} {'fusion':>6} {'psnr_al':>8} "
              f"{'psnr_re':>8} {'epe':>7} {'epe_p90':>8}")
        for r in rows:
            print(f"{r[0]:>5g} {r[1]:>12} {r[2]:>6} {r[3]:>8.3f} "
                  f"{r[4]:>8.3f} {r[5]:>7.3f} {r[6]:>8.3f}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    if args.a and args.b:
        a, b = load_frame(args.a), load_frame(args.b)
        if args.luma:
            if a.channels == 3:
                a, b = rgb_to_luma(a), rgb_to_luma(b)
        print(metric_line("psnr", psnr(a, b)))
        ya = a if a.channels == 1 else rgb_to_luma(a)
        yb = b if b.channels == 1 else rgb_to_luma(b)
        if min(ya.height, ya.width) >= 11:
            print(metric_line("ssim", ssim(ya, yb)))
    if args.fields:
        est, gt = (load_field(p) for p in args.fields)
        e_mean, e_p90 = endpoint_error(est, gt, args.border_crop)
        print(metric_line("epe_mean", e_mean))
        print(metric_line("epe_p90", e_p90))
    if not (args.a and args.b) and not args.fields:
        raise ValueError("nothing to evaluate: need --a/--b and/or --fields")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="talign",
        description="multi-frame alignment, fusion and evaluation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic sequence with GT")
    sp.add_argument("--size", default="256x256")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--motion", default="const:4,0")
    sp.add_argument("--sigma", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cutoff", type=float, default=0.25)
    sp.add_argument("--degradation", default="auto",
                    choices=["auto", "none", "noise", "boxblur"])
    sp.add_argument("--blur-radius", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    rp = sub.add_parser("restore", help="align and fuse a sequence")
    rp.add_argument("--input", required=True,
                    help="PNG directory, printf pattern, or .y4m file")
    rp.add_argument("--kind", default="png-sequence",
                    choices=["png-sequence", "y4m"])
    rp.add_argument("--out", default=None, help="restored PNG path")
    rp.add_argument("--schedule", default="iterative",
                    choices=[k.value for k in ScheduleKind])
    rp.add_argument("--fusion", default="arw", choices=["arw", "mean"])
    rp.add_argument("--no-prior", action="store_true",
                    help="disable iterative refinement priors")
    rp.add_argument("--gt", default=None, help="clean reference for metrics")
    rp.add_argument("--verbose", action="store_true")
    rp.add_argument("--config", default=None)
    _add_motion_flags(rp)
    _add_fusion_flags(rp)
    rp.set_defaults(func=cmd_restore)

    bp = sub.add_parser("bench", help="motion-magnitude benchmark table")
    bp.add_argument("--bins", default="1,2,4,6,8,10")
    bp.add_argument("--seeds", type=int, default=20)
    bp.add_argument("--seed", type=int, default=0, help="master seed")
    bp.add_argument("--n", type=int, default=2)
    bp.add_argument("--size", default="128x128")
    bp.add_argument("--sigma", type=float, default=10.0)
    bp.add_argument("--cutoff", type=float, default=0.25)
    bp.add_argument("--schedules", default="independent,progressive,iterative")
    bp.add_argument("--fusions", default="arw")
    bp.add_argument("--format", default="text", choices=["text", "csv"])
    bp.add_argument("--config", default=None)
    _add_motion_flags(bp)
    _add_fusion_flags(bp)
    bp.set_defaults(func=cmd_bench)

    ep = sub.add_parser("eval", help="PSNR/SSIM between images, EPE between fields")
    ep.add_argument("--a", default=None)
    ep.add_argument("--b", default=None)
    ep.add_argument("--luma", action="store_true",
                    help="evaluate PSNR on the Y channel")
    ep.add_argument("--fields", nargs=2, default=None,
                    metavar=("EST", "GT"))
    ep.add_argument("--border-crop", type=int, default=16)
    ep.set_defaults(func=cmd_eval)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValueError("--config needs a path")
    cfg = parse_config(argv[idx + 1])
    if not cfg:
        return argv
    # config supplies defaults; explicit flags still win
    extra: list[str] = []
    for key, val in cfg.items():
        flag = "--" + key.replace("_", "-")
        if flag in argv:
            continue
        if val.lower() in ("true", "false"):
            if val.lower() == "true":
                extra.append(flag)
        else:
            extra.extend([flag, val])
    return argv[:1] + extra + argv[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        argv = _apply_config(ap, argv)
        args = ap.parse_args(argv)
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal invariant failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
