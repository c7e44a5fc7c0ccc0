"""Test-split evaluation: score predicted maps against fixations.

Per scored frame the five standard scores are computed (AUC-J, SIM,
s-AUC, CC, NSS); the shuffled AUC's negative set is drawn from the
fixation pixels of the *other* videos in the same split, deduplicated
and sorted row-major so the draw is reproducible.  Aggregation weights
every frame equally: domain and overall rows are frame-count-weighted
means.  Predictions and ground truth are cast to float32 before scoring
so that an identical map pair scores CC = 1 exactly.

Predictions normally come from map files written by ``predict`` (one
raw-f32 map per frame, see ``map_dir_loader``); ``model_loader`` scores
a model in memory instead.  Frames with no fixations are skipped and
counted; frames whose prediction is missing are an itemized error
unless ``allow_partial`` is set.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics as M
from .data import Manifest, VideoData, load_clip
from .errors import InputError
from .fileio import read_f32_map, write_f32_map, write_pgm
from .fixations import RenderConfig, render_saliency
from .model import SaliencyModel

COLUMNS = ("auc_judd", "sim", "s_auc", "cc", "nss")


@dataclass
class FrameScore:
    video_id: str
    domain: str
    frame: int
    scores: dict


@dataclass
class EvalResult:
    seed: int
    trials: int
    frames_scored: int
    frames_unfixated: int
    frames_missing: list
    per_domain: dict     # domain -> {metric: mean}
    overall: dict        # {metric: mean}
    domain_frames: dict  # domain -> scored frame count
    frame_scores: list   # [FrameScore]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "trials": self.trials,
            "frames_scored": self.frames_scored,
            "frames_unfixated": self.frames_unfixated,
            "frames_missing": [list(m) for m in self.frames_missing],
            "per_domain": self.per_domain,
            "overall": self.overall,
            "domain_frames": self.domain_frames,
            "frames": [dataclasses.asdict(f) for f in self.frame_scores],
        }


def shuffle_pool(videos: list, exclude: int, width: int) -> np.ndarray:
    """Distinct fixated pixels of every video except ``exclude``,
    sorted row-major; (n, 2) of (x, y)."""
    pts = []
    for i, vd in enumerate(videos):
        if i == exclude:
            continue
        for arr in vd.fixations().values():
            pts.append(np.asarray(arr, dtype=np.int64).reshape(-1, 2))
    if not pts:
        return np.zeros((0, 2), dtype=np.int64)
    allpts = np.concatenate(pts, axis=0)
    keys = np.unique(allpts[:, 1] * width + allpts[:, 0])
    return np.stack([keys % width, keys // width], axis=1)


def score_frame(pred: np.ndarray, gt_map: np.ndarray, fix_points: np.ndarray,
                pool: np.ndarray, seed_seq, trials: int = 100) -> dict:
    pred32 = np.asarray(pred, dtype=np.float32)
    gt32 = np.asarray(gt_map, dtype=np.float32)
    if pool.shape[0] == 0:
        raise InputError("empty shuffle pool: s-AUC needs at least one "
                         "other video with fixations in the split")
    return {
        "auc_judd": M.auc_judd(pred32, fix_points),
        "sim": M.sim(pred32, gt32),
        "s_auc": M.s_auc(pred32, fix_points, pool, trials=trials,
                         seed=seed_seq),
        "cc": M.cc(pred32, gt32),
        "nss": M.nss(pred32, fix_points),
    }


# ---------------------------------------------------------------------------
# prediction sources
# ---------------------------------------------------------------------------

def map_name(frame: int) -> str:
    return f"frame_{frame:05d}"


def map_dir_loader(pred_dir):
    """Loader over ``<pred_dir>/<video_id>/frame_NNNNN.f32`` files."""
    pred_dir = Path(pred_dir)

    def load(vd: VideoData, t: int):
        path = pred_dir / vd.entry.id / (map_name(t) + ".f32")
        if not path.exists():
            return None
        return read_f32_map(path)

    return load


def model_loader(model: SaliencyModel, manifest: Manifest):
    """Loader that runs the model on the clip ending at each frame."""

    def load(vd: VideoData, t: int):
        clip = load_clip(vd, t, model.cfg.k, manifest.sample_rate,
                         manifest.fps, None)
        return model.forward(clip.frames, clip.wave).data

    return load


def predict_video(model: SaliencyModel, video: VideoData, out_dir,
                  frames, sample_rate: int, fps: float) -> list:
    """Write one PGM + raw-f32 map pair per requested frame; returns paths.

    Every map is computed before anything is written, so a failed run
    leaves no partial output behind.
    """
    preds = []
    for t in frames:
        clip = load_clip(video, t, model.cfg.k, sample_rate, fps, None)
        preds.append((t, model.forward(clip.frames, clip.wave).data))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for t, pred in preds:
        base = out_dir / map_name(t)
        write_f32_map(base.with_suffix(".f32"), pred)
        write_pgm(base.with_suffix(".pgm"), pred)
        written.append(base)
    return written


# ---------------------------------------------------------------------------
# split evaluation
# ---------------------------------------------------------------------------

def evaluate_split(manifest: Manifest, load_pred, seed: int = 0,
                   trials: int = 100, allow_partial: bool = False,
                   split: str = "test", progress=None) -> EvalResult:
    """Score every fixated frame of the chosen split."""
    entries = manifest.split(split)
    if not entries:
        raise InputError(f"manifest has no '{split}' videos")
    videos = [VideoData.for_entry(manifest, e) for e in entries]
    render_cfg = RenderConfig(sigma=manifest.render_sigma)
    shape = (manifest.height, manifest.width)

    frame_scores = []
    unfixated = 0
    missing = []
    for vi, vd in enumerate(videos):
        pool = shuffle_pool(videos, exclude=vi, width=manifest.width)
        fixmap = vd.fixations()
        for t in range(vd.entry.frames):
            pts = fixmap.get(t)
            if pts is None or len(pts) == 0:
                unfixated += 1
                continue
            pred = load_pred(vd, t)
            if pred is None:
                missing.append((vd.entry.id, t))
                continue
            if pred.shape != shape:
                raise InputError(
                    f"{vd.entry.id} frame {t}: prediction shape {pred.shape}"
                    f" does not match the manifest extents {shape}")
            gt = render_saliency(pts, shape, render_cfg)
            seed_seq = np.random.SeedSequence([seed, vi, t])
            scores = score_frame(pred, gt, pts, pool, seed_seq, trials=trials)
            frame_scores.append(FrameScore(
                video_id=vd.entry.id, domain=vd.entry.domain, frame=t,
                scores=scores))
            if progress is not None:
                progress(vd.entry.id, t, scores)
    if missing and not allow_partial:
        listing = ", ".join(f"{v}:{t}" for v, t in missing)
        raise InputError(f"{len(missing)} prediction(s) missing "
                         f"({listing}); rerun with allow_partial to skip")
    if not frame_scores:
        raise InputError("no frames were scored")

    per_domain: dict = {}
    domain_frames: dict = {}
    for fs in frame_scores:
        acc = per_domain.setdefault(fs.domain, {m: 0.0 for m in COLUMNS})
        for m in COLUMNS:
            acc[m] += fs.scores[m]
        domain_frames[fs.domain] = domain_frames.get(fs.domain, 0) + 1
    for dom, acc in per_domain.items():
        for m in COLUMNS:
            acc[m] /= domain_frames[dom]
    overall = {m: sum(fs.scores[m] for fs in frame_scores) / len(frame_scores)
               for m in COLUMNS}
    return EvalResult(seed=seed, trials=trials,
                      frames_scored=len(frame_scores),
                      frames_unfixated=unfixated, frames_missing=missing,
                      per_domain=per_domain, overall=overall,
                      domain_frames=domain_frames, frame_scores=frame_scores)
