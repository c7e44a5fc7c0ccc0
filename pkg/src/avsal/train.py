"""Training loop: seeded sampling schedule, threaded clip prefetch, Adam.

One step = one mini-batch of (clip, ground-truth map) pairs drawn with
replacement from the manifest's train split; the loss is the mean KL
divergence over the batch.  The whole sampling schedule is drawn up
front from a PCG64 stream derived from the run seed, so a run is
reproducible regardless of loader thread timing.
"""

from __future__ import annotations

import dataclasses
import json
import queue
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .data import Manifest, VideoData, load_clip
from .decoder import kld_loss
from .errors import InputError
from .fixations import RenderConfig
from .model import SaliencyModel
from .optim import Adam
from .tensor import Tape, add, mul

RUN_RECORD_SCHEMA = 1


@dataclass
class RunRecord:
    schema_version: int
    seed: int
    steps: int
    batch_size: int
    param_count: int
    param_millions: float
    losses: list
    final_loss: float
    wall_time_s: float
    config: dict

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def training_pairs(manifest: Manifest, cfg: ModelConfig) -> tuple:
    """Loaders plus all (video_index, target_frame) pairs eligible for
    supervision.

    A frame is eligible when it has at least one fixation; in "last"
    target mode only each video's final frame is considered.
    """
    pairs = []
    train = manifest.split("train")
    videos = [VideoData.for_entry(manifest, e) for e in train]
    for vi, vd in enumerate(videos):
        fixmap = vd.fixations()
        candidates = [vd.entry.frames - 1] if cfg.target_mode == "last" \
            else range(vd.entry.frames)
        for t in candidates:
            pts = fixmap.get(t)
            if pts is not None and len(pts) > 0:
                pairs.append((vi, t))
    if not pairs:
        raise InputError("train split has no frames with fixations")
    return videos, pairs


def _prefetcher(videos, pairs, schedule, manifest, cfg, out_q):
    render_cfg = RenderConfig(sigma=manifest.render_sigma)
    try:
        for batch_ids in schedule:
            batch = []
            for i in batch_ids:
                vi, t = pairs[i]
                clip = load_clip(videos[vi], t, cfg.k, manifest.sample_rate,
                                 manifest.fps, render_cfg)
                batch.append(clip)
            out_q.put(batch)
    except BaseException as exc:  # surfaced in the training thread
        out_q.put(exc)


def train(cfg: ModelConfig, manifest: Manifest, out_dir,
          progress=None) -> RunRecord:
    """Run the configured number of steps and write all run artifacts.

    Writes to out_dir: config.json, checkpoint.ckpt, loss.csv,
    loss_curve.png, run_record.json.
    """
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = SaliencyModel(cfg)
    videos, pairs = training_pairs(manifest, cfg)

    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([cfg.seed, 1])))
    schedule = [rng.integers(0, len(pairs), size=cfg.batch_size).tolist()
                for _ in range(cfg.steps)]

    out_q: queue.Queue = queue.Queue(maxsize=max(1, cfg.prefetch))
    loader = threading.Thread(
        target=_prefetcher, args=(videos, pairs, schedule, manifest, cfg, out_q),
        daemon=True)
    loader.start()

    opt = Adam(model.pset.tensors(), lr=cfg.lr, beta1=cfg.beta1,
               beta2=cfg.beta2)
    losses = []
    t0 = time.monotonic()
    for step in range(cfg.steps):
        batch = out_q.get()
        if isinstance(batch, BaseException):
            raise batch
        with Tape() as tape:
            total = None
            for clip in batch:
                pred = model.forward(clip.frames, clip.wave)
                term = kld_loss(pred, clip.gt)
                total = term if total is None else add(total, term)
            loss = mul(total, 1.0 / len(batch))
            value = float(loss.data)
            if not np.isfinite(value):
                raise RuntimeError(f"nonfinite loss {value} at step {step}")
            tape.backward(loss)
        opt.step()
        opt.zero_grad()
        losses.append(value)
        if progress is not None:
            progress(step, value)
    wall = time.monotonic() - t0
    loader.join(timeout=5.0)

    record = RunRecord(
        schema_version=RUN_RECORD_SCHEMA, seed=cfg.seed, steps=cfg.steps,
        batch_size=cfg.batch_size, param_count=model.param_count(),
        param_millions=round(model.param_count() / 1e6, 6),
        losses=losses, final_loss=losses[-1] if losses else float("nan"),
        wall_time_s=round(wall, 3), config=cfg.to_dict())

    cfg.to_json(out_dir / "config.json")
    model.save(out_dir / "checkpoint.ckpt")
    with open(out_dir / "loss.csv", "w") as fh:
        fh.write("step,loss\n")
        for i, v in enumerate(losses):
            fh.write(f"{i},{v:.8f}\n")
    from .report import plot_loss_curve
    plot_loss_curve(losses, out_dir / "loss_curve.png")
    record.save(out_dir / "run_record.json")
    return record
