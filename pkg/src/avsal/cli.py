"""Command-line entry point.

Commands: synth, ingest, render, manifest, train, predict, eval, params.
Exit codes: 0 success, 1 validation error (bad config, bad input data,
dimension mismatch), 2 runtime failure (including command-line usage
errors, which argparse itself exits 2 on).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import ModelConfig, fixture_config, full_scale_config
from .data import (FixtureSpec, VideoData, build_manifest, load_manifest,
                   synth_fixture)
from .errors import UsageError, ValidationError
from .evaluate import evaluate_split, map_dir_loader, predict_video
from .fileio import write_f32_map, write_pgm
from .fixations import (RenderConfig, default_sigma, ingest_gaze,
                        load_fixation_csv, render_saliency,
                        save_fixation_csv)
from .model import SaliencyModel
from .params import load_checkpoint
from .report import format_report_table, write_reports
from .summary import format_mac_table, format_param_table
from .train import train


def _add_common(p: argparse.ArgumentParser, out_required=True):
    p.add_argument("--seed", type=int, default=None,
                   help="random seed override")
    p.add_argument("--config", type=str, default=None,
                   help="model/run config JSON")
    p.add_argument("--out", type=str, required=out_required,
                   help="output path")


def _load_config(args, fallback="fixture") -> ModelConfig:
    if args.config:
        return ModelConfig.from_json(args.config)
    preset = getattr(args, "preset", None) or fallback
    cfg = full_scale_config() if preset == "full" else fixture_config()
    return cfg


def _apply_overrides(cfg: ModelConfig, args) -> ModelConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    for name in ("steps", "batch_size", "lr", "k"):
        v = getattr(args, name, None)
        if v is not None:
            changes[name] = v
    if getattr(args, "no_ufm", False):
        changes["no_ufm"] = True
    if getattr(args, "no_inter", False):
        changes["no_inter"] = True
    branches = getattr(args, "branches", None)
    if branches is not None:
        names = tuple(b for b in branches.split(",") if b) \
            if branches != "none" else ()
        changes["ufm_branches"] = names
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
        cfg.validate()
    return cfg


def _parse_frames(spec: str, video: VideoData):
    n = video.entry.frames
    if spec == "all":
        return list(range(n))
    if spec == "last":
        return [n - 1]
    if spec == "fixated":
        fixmap = video.fixations()
        return [t for t in range(n)
                if fixmap.get(t) is not None and len(fixmap[t]) > 0]
    try:
        frames = [int(s) for s in spec.split(",") if s]
    except ValueError:
        raise UsageError(f"--frames wants 'all', 'last', 'fixated' or a "
                         f"comma list of indices, got {spec!r}")
    return frames


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = FixtureSpec(videos=args.videos, frames=args.frames,
                       height=args.height, width=args.width,
                       fps=args.fps, sample_rate=args.sample_rate,
                       observers=args.observers, scatter=args.scatter,
                       sigma=args.sigma, seed=args.seed or 0,
                       categories=args.categories)
    meta = synth_fixture(spec, args.out)
    print(f"wrote {len(meta['videos'])} videos under {args.out}")
    return 0


def cmd_ingest(args) -> int:
    frames, dropped = ingest_gaze(args.gaze, fps=args.fps, width=args.width,
                                  height=args.height,
                                  collapse=not args.keep_all_samples)
    save_fixation_csv(args.out, frames)
    total = sum(len(v) for v in frames.values())
    print(f"{total} fixations over {len(frames)} frames -> {args.out} "
          f"({dropped} out-of-bounds samples dropped)")
    return 0


def cmd_render(args) -> int:
    frames = load_fixation_csv(args.fixations)
    sigma = args.sigma if args.sigma is not None else default_sigma(args.width)
    render_cfg = RenderConfig(sigma=sigma)
    targets = sorted(frames) if args.frame is None else args.frame
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t in targets:
        pts = frames.get(t)
        gt = render_saliency(pts if pts is not None else [],
                             (args.height, args.width), render_cfg)
        write_pgm(out / f"frame_{t:05d}.pgm", gt)
        write_f32_map(out / f"frame_{t:05d}.f32", gt)
    print(f"rendered {len(targets)} map(s) at sigma={sigma:g} -> {out}")
    return 0


def cmd_manifest(args) -> int:
    manifest = build_manifest(args.root, seed=args.seed or 0,
                              sigma=args.sigma, fps=args.fps,
                              sample_rate=args.sample_rate)
    manifest.save(args.out)
    for domain, c in sorted(manifest.counts().items()):
        print(f"{domain}: {c['train']} train / {c['test']} test")
    print(f"manifest -> {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _apply_overrides(_load_config(args), args)
    manifest = load_manifest(args.manifest)
    every = max(1, cfg.steps // 10)

    def progress(step, value):
        if step % every == 0 or step == cfg.steps - 1:
            print(f"step {step:5d}  loss {value:.5f}", flush=True)

    record = train(cfg, manifest, args.out,
                   progress=None if args.quiet else progress)
    print(f"final loss {record.final_loss:.5f} after {record.steps} steps "
          f"({record.wall_time_s:.1f}s); artifacts -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    cfg_path = args.config
    if cfg_path is None:
        sibling = Path(args.checkpoint).parent / "config.json"
        if sibling.exists():
            cfg_path = sibling
    if cfg_path is None:
        raise UsageError("predict needs --config (or a config.json next to "
                         "the checkpoint)")
    cfg = ModelConfig.from_json(cfg_path)
    model = SaliencyModel(cfg)
    model.load(args.checkpoint)
    out = Path(args.out)

    if args.manifest:
        manifest = load_manifest(args.manifest)
        entries = manifest.split(args.split)
        if not entries:
            raise UsageError(f"manifest has no '{args.split}' videos")
        total = 0
        for e in entries:
            vd = VideoData.for_entry(manifest, e)
            frames = _parse_frames(args.frames or "fixated", vd)
            written = predict_video(model, vd, out / e.id, frames,
                                    manifest.sample_rate, manifest.fps)
            total += len(written)
        print(f"{total} maps -> {out}")
        return 0

    if not args.clip:
        raise UsageError("predict needs a clip directory or --manifest")
    vd = VideoData.from_dir(args.clip)
    frames = _parse_frames(args.frames or "all", vd)
    written = predict_video(model, vd, out / vd.entry.id, frames,
                            cfg.sample_rate, cfg.fps)
    print(f"{len(written)} maps -> {out / vd.entry.id}")
    return 0


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    loader = map_dir_loader(args.pred)
    result = evaluate_split(manifest, loader, seed=args.seed or 0,
                            trials=args.trials,
                            allow_partial=args.allow_partial,
                            split=args.split)
    paths = write_reports(result, args.out)
    sys.stdout.write(format_report_table(result))
    print(f"reports -> {paths['json'].parent}")
    return 0


def cmd_params(args) -> int:
    if not args.checkpoint and not args.config:
        raise UsageError("params needs a checkpoint and/or --config")
    cfg = None
    if args.config:
        cfg = ModelConfig.from_json(args.config)
    elif args.checkpoint:
        sibling = Path(args.checkpoint).parent / "config.json"
        if sibling.exists():
            cfg = ModelConfig.from_json(sibling)
    if args.checkpoint:
        arrays = load_checkpoint(args.checkpoint)
    else:
        arrays = SaliencyModel(cfg).pset.state_arrays()
    sys.stdout.write(format_param_table(arrays))
    if cfg is not None:
        sys.stdout.write("\n")
        sys.stdout.write(format_mac_table(cfg))
        if cfg.reference_param_m is not None:
            print(f"\nreference full-scale budget: {cfg.reference_param_m:g} M "
                  f"parameters (informational; this build is desk-scale)")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="avsal",
        description="audio-visual saliency: fixtures, training, evaluation")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic mini dataset")
    _add_common(p)
    p.add_argument("--videos", type=int, default=1)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=56)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.add_argument("--observers", type=int, default=4)
    p.add_argument("--scatter", type=float, default=1.5)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--categories", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="gaze log CSV -> per-frame fixation CSV")
    _add_common(p)
    p.add_argument("gaze", help="gaze log (timestamp_ms,observer,x,y)")
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--keep-all-samples", action="store_true",
                   help="keep every sample instead of collapsing to the "
                        "latest sample per observer per frame")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("render", help="fixation CSV -> saliency map files")
    _add_common(p)
    p.add_argument("fixations")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--frame", type=int, action="append",
                   help="frame to render (repeatable; default: all)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("manifest", help="scan a dataset tree, assign splits")
    _add_common(p)
    p.add_argument("root")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--sample-rate", type=int, default=None)
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("train", help="train a model on a manifest")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--preset", choices=("fixture", "full"), default=None,
                   help="base config when --config is not given")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--no-ufm", dest="no_ufm", action="store_true")
    p.add_argument("--no-inter", dest="no_inter", action="store_true")
    p.add_argument("--branches",
                   help="comma list from {high,low,channel}, or 'none'")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write saliency maps for a clip")
    _add_common(p)
    p.add_argument("clip", nargs="?", help="video directory (frames/ + audio.wav)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", help="predict over a manifest split instead")
    p.add_argument("--split", default="test")
    p.add_argument("--frames",
                   help="'all', 'last', 'fixated', or comma list of indices")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predicted maps against a manifest")
    _add_common(p)
    p.add_argument("--pred", required=True, help="prediction map directory")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--trials", type=int, default=100,
                   help="negative-sampling trials for the shuffled AUC")
    p.add_argument("--allow-partial", action="store_true",
                   help="skip frames with missing predictions instead of failing")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("params", help="parameter/compute summary")
    _add_common(p, out_required=False)
    p.add_argument("checkpoint", nargs="?")
    p.set_defaults(func=cmd_params)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # stdout went away (e.g. piped to head); silence the shutdown flush
        import os
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (FileNotFoundError, IsADirectoryError, NotADirectoryError) as e:
        # a missing/mistyped input path is the caller's data, not our crash
        print(f"error: {e}", file=sys.stderr)
        return 1
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
