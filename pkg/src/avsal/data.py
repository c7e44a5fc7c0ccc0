"""Dataset layout, manifests, clip assembly, and the synthetic fixture.

On-disk layout::

    root/<domain>/<category>/<video_id>/
        frames/frame_00000.png ...   8-bit RGB frames
        audio.wav                    16-bit PCM mono
        fixations.csv                frame,observer,x,y
        gaze.csv                     optional raw samples

The manifest is JSON (sorted keys, 2-space indent) listing every video
with its domain, category, frame count and split.  The split is
stratified by category with a seeded PCG64 shuffle: per domain,
``n_train = (82 * n + 50) // 100`` videos go to train (ties round up),
allocated across categories by largest remainder (ties favor earlier
category names), so a 100-video domain splits exactly 82/18.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .fileio import read_frame, read_wav, write_frame, write_wav
from .fixations import (RenderConfig, load_fixation_csv, render_saliency,
                        save_fixation_csv, default_sigma)

MANIFEST_SCHEMA = 1
FIXTURE_META = "fixture.json"


@dataclass
class VideoEntry:
    id: str
    domain: str
    category: str
    path: str          # relative to the dataset root
    frames: int
    split: str

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Manifest:
    root: Path
    seed: int
    fps: float
    sample_rate: int
    render_sigma: float
    height: int
    width: int
    videos: list

    def split(self, which: str) -> list:
        return [v for v in self.videos if v.split == which]

    def counts(self) -> dict:
        out: dict = {}
        for v in self.videos:
            d = out.setdefault(v.domain, {"train": 0, "test": 0})
            d[v.split] += 1
        return out

    def save(self, path) -> None:
        doc = {
            "schema_version": MANIFEST_SCHEMA,
            "seed": self.seed,
            "fps": self.fps,
            "sample_rate": self.sample_rate,
            "render_sigma": self.render_sigma,
            "height": self.height,
            "width": self.width,
            "videos": [v.to_dict() for v in self.videos],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_manifest(path) -> Manifest:
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != MANIFEST_SCHEMA:
        raise InputError(f"{path}: unsupported manifest schema "
                         f"{doc.get('schema_version')}")
    videos = [VideoEntry(**v) for v in doc["videos"]]
    return Manifest(root=path.parent, seed=doc["seed"], fps=doc["fps"],
                    sample_rate=doc["sample_rate"],
                    render_sigma=doc["render_sigma"], height=doc["height"],
                    width=doc["width"], videos=videos)


def _train_quota(n: int) -> int:
    """Train-video count for an n-video domain: nearest to 82%, ties up."""
    return (82 * n + 50) // 100


def build_manifest(root, seed: int, sigma: float | None = None,
                   fps: float | None = None,
                   sample_rate: int | None = None) -> Manifest:
    """Scan a dataset tree, validate assets, and assign the train/test split."""
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"dataset root {root} is not a directory")
    meta = {}
    meta_path = root / FIXTURE_META
    if meta_path.exists():
        with open(meta_path) as fh:
            meta = json.load(fh).get("spec", {})
    fps = fps if fps is not None else float(meta.get("fps", 30.0))
    sample_rate = sample_rate if sample_rate is not None \
        else int(meta.get("sample_rate", 8000))

    problems = []
    videos = []
    domains = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not domains:
        raise InputError(f"dataset root {root} has no domain directories")
    for domain in domains:
        for cat_dir in sorted((root / domain).iterdir()):
            if not cat_dir.is_dir():
                continue
            for vid_dir in sorted(cat_dir.iterdir()):
                if not vid_dir.is_dir():
                    continue
                frames_dir = vid_dir / "frames"
                frame_files = sorted(frames_dir.glob("frame_*")) \
                    if frames_dir.is_dir() else []
                if not frame_files:
                    problems.append(f"{vid_dir}: no frames")
                if not (vid_dir / "audio.wav").exists():
                    problems.append(f"{vid_dir}: missing audio.wav")
                if not (vid_dir / "fixations.csv").exists():
                    problems.append(f"{vid_dir}: missing fixations.csv")
                videos.append(VideoEntry(
                    id=vid_dir.name, domain=domain, category=cat_dir.name,
                    path=str(vid_dir.relative_to(root)),
                    frames=len(frame_files), split="train"))
    if problems:
        raise InputError("dataset tree is incomplete:\n  - " +
                         "\n  - ".join(problems))
    if not videos:
        raise InputError(f"no videos found under {root}")

    first = read_frame(next(iter(sorted(
        (root / videos[0].path / "frames").glob("frame_*")))))
    height, width = first.shape[0], first.shape[1]
    if sigma is None:
        sigma = float(meta.get("sigma", default_sigma(width)))

    rng = np.random.Generator(np.random.PCG64(seed))
    by_domain: dict[str, dict[str, list]] = {}
    for v in videos:
        by_domain.setdefault(v.domain, {}).setdefault(v.category, []).append(v)
    for domain in sorted(by_domain):
        cats = by_domain[domain]
        n_dom = sum(len(vs) for vs in cats.values())
        n_train = _train_quota(n_dom)
        names = sorted(cats)
        base, rem = {}, {}
        for c in names:
            q = n_train * len(cats[c])
            base[c] = q // n_dom
            rem[c] = q % n_dom
        extras = n_train - sum(base.values())
        for c in sorted(names, key=lambda c: (-rem[c], c)):
            if extras <= 0:
                break
            if base[c] < len(cats[c]):
                base[c] += 1
                extras -= 1
        for c in names:
            vs = cats[c]
            order = rng.permutation(len(vs))
            chosen = set(order[:base[c]].tolist())
            for i, v in enumerate(vs):
                v.split = "train" if i in chosen else "test"

    videos.sort(key=lambda v: (v.domain, v.category, v.id))
    return Manifest(root=root, seed=seed, fps=fps, sample_rate=sample_rate,
                    render_sigma=float(sigma), height=int(height),
                    width=int(width), videos=videos)


# ---------------------------------------------------------------------------
# clip assembly
# ---------------------------------------------------------------------------

class VideoData:
    """Lazily loaded, memoized assets for one video directory."""

    def __init__(self, directory, entry: VideoEntry):
        self.entry = entry
        self.dir = Path(directory)
        self._frames = None
        self._wave = None
        self._fixations = None

    @classmethod
    def for_entry(cls, manifest: Manifest, entry: VideoEntry) -> "VideoData":
        return cls(manifest.root / entry.path, entry)

    @classmethod
    def from_dir(cls, directory) -> "VideoData":
        """Wrap a bare video directory (frames/ + audio.wav), no manifest."""
        directory = Path(directory)
        n = len(sorted((directory / "frames").glob("frame_*"))) \
            if (directory / "frames").is_dir() else 0
        if n == 0:
            raise InputError(f"{directory}: no frames/frame_* files")
        entry = VideoEntry(id=directory.name, domain="", category="",
                           path=".", frames=n, split="")
        return cls(directory, entry)

    def frames(self) -> np.ndarray:
        if self._frames is None:
            files = sorted((self.dir / "frames").glob("frame_*"))
            if not files:
                raise InputError(f"{self.dir}: no frames on disk")
            self._frames = np.stack([read_frame(p) for p in files])
        return self._frames

    def wave(self) -> np.ndarray:
        if self._wave is None:
            self._wave, _ = read_wav(self.dir / "audio.wav")
        return self._wave

    def fixations(self) -> dict:
        if self._fixations is None:
            self._fixations = load_fixation_csv(self.dir / "fixations.csv")
        return self._fixations


@dataclass
class ClipSample:
    video_id: str
    target: int
    frames: np.ndarray      # (k, 3, H, W) float32 in [0, 1]
    wave: np.ndarray        # (S,) float32
    gt: np.ndarray | None   # (H, W) float64, None when the frame has no fixations


def load_clip(video: VideoData, target: int, k: int, sample_rate: int,
              fps: float, render_cfg: RenderConfig | None) -> ClipSample:
    """Assemble the k-frame clip ending at ``target`` plus its audio window.

    Clips near the start repeat the first frame; the audio window is
    zero-padded to exactly round(k * sample_rate / fps) samples.
    """
    all_frames = video.frames()
    n = all_frames.shape[0]
    if not 0 <= target < n:
        raise InputError(f"target frame {target} outside 0..{n - 1}")
    idx = np.clip(np.arange(target - k + 1, target + 1), 0, n - 1)
    frames = np.transpose(all_frames[idx], (0, 3, 1, 2)).astype(np.float32)

    spc = int(round(k * sample_rate / fps))
    end = int(round((target + 1) * sample_rate / fps))
    start = end - spc
    wave_full = video.wave()
    lo, hi = max(0, start), min(len(wave_full), max(0, end))
    body = wave_full[lo:hi] if hi > lo else np.zeros(0, dtype=np.float32)
    wave = np.zeros(spc, dtype=np.float32)
    off = lo - start
    wave[off:off + len(body)] = body

    gt = None
    if render_cfg is not None:
        pts = video.fixations().get(target)
        if pts is not None and len(pts) > 0:
            gt = render_saliency(pts, all_frames.shape[1:3], render_cfg)
    return ClipSample(video_id=video.entry.id, target=target, frames=frames,
                      wave=wave, gt=gt)


# ---------------------------------------------------------------------------
# synthetic fixture
# ---------------------------------------------------------------------------

@dataclass
class FixtureSpec:
    videos: int = 1
    frames: int = 16
    height: int = 32
    width: int = 56
    fps: float = 30.0
    sample_rate: int = 8000
    observers: int = 4
    scatter: float = 1.5
    sigma: float = 2.0
    seed: int = 0
    gaze_hz: float = 60.0
    categories: int = 1
    domains: tuple = ("cartoon", "game")


def _blob_frame(h, w, cx, cy, tint, blob_sigma=2.5):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    blob = np.exp(-0.5 * ((xx - cx) ** 2 + (yy - cy) ** 2) / blob_sigma ** 2)
    img = 0.1 + 0.85 * blob[..., None] * tint[None, None, :]
    return np.clip(img, 0.0, 1.0)


def synth_fixture(spec: FixtureSpec, root) -> dict:
    """Write a self-consistent mini dataset: a bright blob wanders over a
    dark background, the soundtrack's pitch/loudness track the blob's
    position, and fixations scatter around the blob center (observer o0
    sits exactly on it).  Returns the metadata written to fixture.json.
    """
    if spec.videos < 1 or spec.frames < 1 or spec.observers < 1:
        raise InputError("fixture needs at least one video/frame/observer")
    root = Path(root)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    h, w = spec.height, spec.width
    margin = max(3.0, min(h, w) / 8.0)
    meta: dict = {"spec": dataclasses.asdict(spec), "videos": {}}

    for vi in range(spec.videos):
        domain = spec.domains[vi % len(spec.domains)]
        cat = f"{domain}_c{(vi // len(spec.domains)) % spec.categories}"
        vid = f"vid{vi:03d}"
        vdir = root / domain / cat / vid
        (vdir / "frames").mkdir(parents=True, exist_ok=True)

        fx, fy = rng.uniform(0.7, 1.6, size=2)
        px, py = rng.uniform(0.0, 2.0 * math.pi, size=2)
        tint = rng.uniform(0.6, 1.0, size=3)
        ts_f = np.arange(spec.frames, dtype=np.float64)

        def cx_of(t):
            return margin + (w - 1 - 2 * margin) * (
                0.5 + 0.45 * np.sin(2.0 * math.pi * fx * t / spec.frames + px))

        def cy_of(t):
            return margin + (h - 1 - 2 * margin) * (
                0.5 + 0.45 * np.sin(2.0 * math.pi * fy * t / spec.frames + py))

        centers = np.stack([cx_of(ts_f), cy_of(ts_f)], axis=1)
        for t in range(spec.frames):
            frame = _blob_frame(h, w, centers[t, 0], centers[t, 1], tint)
            write_frame(vdir / "frames" / f"frame_{t:05d}.png", frame)

        n_samples = int(round(spec.frames * spec.sample_rate / spec.fps))
        st = np.arange(n_samples, dtype=np.float64) / spec.sample_rate
        ft = st * spec.fps
        freq = 200.0 + 1200.0 * (cx_of(ft) / (w - 1))
        amp = 0.2 + 0.7 * (1.0 - cy_of(ft) / (h - 1))
        phase = np.cumsum(2.0 * math.pi * freq / spec.sample_rate)
        write_wav(vdir / "audio.wav", amp * np.sin(phase), spec.sample_rate)

        fix_frames = {}
        for t in range(spec.frames):
            pts = []
            cx, cy = centers[t]
            for oi in range(spec.observers):
                if oi == 0 or spec.scatter == 0.0:
                    x, y = round(cx), round(cy)
                else:
                    x = round(cx + rng.normal(0.0, spec.scatter))
                    y = round(cy + rng.normal(0.0, spec.scatter))
                pts.append((min(max(int(x), 0), w - 1),
                            min(max(int(y), 0), h - 1)))
            fix_frames[t] = np.array(pts, dtype=np.int64)
        save_fixation_csv(vdir / "fixations.csv", fix_frames)

        gaze_rows = ["timestamp_ms,observer,x,y"]
        duration_ms = spec.frames * 1000.0 / spec.fps
        ts = 0.0
        while ts < duration_ms:
            t_frame = ts * spec.fps / 1000.0
            cx, cy = float(cx_of(np.array(t_frame))), float(cy_of(np.array(t_frame)))
            for oi in range(spec.observers):
                jx = jy = 0.0
                if spec.scatter > 0 and oi > 0:
                    jx, jy = rng.normal(0.0, spec.scatter, size=2)
                x = min(max(round(cx + jx), 0), w - 1)
                y = min(max(round(cy + jy), 0), h - 1)
                gaze_rows.append(f"{ts:.3f},o{oi},{int(x)},{int(y)}")
            ts += 1000.0 / spec.gaze_hz
        (vdir / "gaze.csv").write_text("\n".join(gaze_rows) + "\n")

        meta["videos"][vid] = {"domain": domain, "category": cat,
                               "centers": centers.tolist()}

    with open(root / FIXTURE_META, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta
