"""Gaze-log ingestion and fixation-map rendering.

Gaze logs are CSV with header ``timestamp_ms,observer,x,y`` (raw eye
samples).  Ingestion assigns each sample to the frame
``floor(timestamp_ms * fps / 1000)``, drops out-of-bounds samples
(0 <= x < width, 0 <= y < height) while counting them, and — in the
default per-frame mode — keeps only each observer's latest sample per
frame (ties broken by file order, later row wins).  ``collapse=False``
keeps every in-bounds sample instead, for data that is already one
fixation per row.

Fixation files are CSV with header ``frame,observer,x,y`` and integer
pixel coordinates.

Rendering sums an isotropic Gaussian per fixation point (truncated at
``truncate * sigma`` pixels) and divides by the peak, so a non-empty
map has maximum exactly 1.0.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

log = logging.getLogger(__name__)


@dataclass
class RenderConfig:
    sigma: float
    truncate: float = 3.0


def default_sigma(width: int) -> float:
    """Map-width-relative blur: about one degree of visual angle for a
    1920-px-wide display viewed at arm's length scales to width/48."""
    return width / 48.0


def render_saliency(points, shape, render_cfg: RenderConfig) -> np.ndarray:
    """Sum of per-fixation Gaussians, peak-normalized to exactly 1.0.

    points: (n, 2) array of (x, y); shape: (H, W).  An empty point set
    renders a zero map (and logs a warning).
    """
    h, w = shape
    out = np.zeros((h, w), dtype=np.float64)
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    if pts.shape[0] == 0:
        log.warning("rendering an empty fixation set: zero map")
        return out
    if (pts[:, 0] < 0).any() or (pts[:, 0] >= w).any() \
            or (pts[:, 1] < 0).any() or (pts[:, 1] >= h).any():
        raise InputError(f"fixation outside the {w}x{h} canvas")
    sigma = float(render_cfg.sigma)
    if sigma <= 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    r = int(math.ceil(render_cfg.truncate * sigma))
    span = np.arange(-r, r + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (span[:, None] ** 2 + span[None, :] ** 2) / sigma ** 2)
    for x, y in pts:
        y0, y1 = max(0, y - r), min(h, y + r + 1)
        x0, x1 = max(0, x - r), min(w, x + r + 1)
        out[y0:y1, x0:x1] += kernel[y0 - (y - r):y1 - (y - r),
                                    x0 - (x - r):x1 - (x - r)]
    peak = out.max()
    if peak > 0:
        out /= peak
    return out


# ---------------------------------------------------------------------------
# CSV formats
# ---------------------------------------------------------------------------

GAZE_HEADER = ["timestamp_ms", "observer", "x", "y"]
FIXATION_HEADER = ["frame", "observer", "x", "y"]


def ingest_gaze(path, fps: float, width: int, height: int,
                collapse: bool = True):
    """Gaze log CSV -> ({frame: (n, 2) points}, dropped_count).

    Malformed rows abort with an error listing their line numbers.
    """
    rows = []
    bad_lines = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != GAZE_HEADER:
            raise InputError(
                f"{path}: expected header {','.join(GAZE_HEADER)!r}, "
                f"got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                bad_lines.append(lineno)
                continue
            try:
                ts = float(row[0])
                obs = row[1].strip()
                x = int(float(row[2]))
                y = int(float(row[3]))
            except ValueError:
                bad_lines.append(lineno)
                continue
            if not obs or ts < 0:
                bad_lines.append(lineno)
                continue
            rows.append((ts, obs, x, y))
    if bad_lines:
        raise InputError(f"{path}: malformed rows at lines {bad_lines}")

    dropped = 0
    per_frame: dict[int, dict] = {}
    for order, (ts, obs, x, y) in enumerate(rows):
        if not (0 <= x < width and 0 <= y < height):
            dropped += 1
            continue
        frame = int(math.floor(ts * fps / 1000.0))
        slot = per_frame.setdefault(frame, {})
        if collapse:
            prev = slot.get(obs)
            if prev is None or (ts, order) >= prev[:2]:
                slot[obs] = (ts, order, x, y)
        else:
            slot[(obs, order)] = (ts, order, x, y)

    result = {}
    for frame in sorted(per_frame):
        entries = sorted(per_frame[frame].values(), key=lambda e: (e[0], e[1]))
        result[frame] = np.array([(x, y) for _, _, x, y in entries],
                                 dtype=np.int64)
    return result, dropped


def save_fixation_csv(path, frames: dict, observer_names=None) -> None:
    """{frame: (n, 2) points} -> fixation CSV.

    Observer labels are positional (``o0``, ``o1``, ...) unless given.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIXATION_HEADER)
        for frame in sorted(frames):
            pts = np.asarray(frames[frame], dtype=np.int64).reshape(-1, 2)
            for i, (x, y) in enumerate(pts):
                name = observer_names[i] if observer_names else f"o{i}"
                writer.writerow([frame, name, int(x), int(y)])


def load_fixation_csv(path) -> dict:
    """Fixation CSV -> {frame: (n, 2) points}, file order preserved."""
    frames: dict[int, list] = {}
    bad_lines = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != FIXATION_HEADER:
            raise InputError(
                f"{path}: expected header {','.join(FIXATION_HEADER)!r}, "
                f"got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                frame = int(row[0])
                x, y = int(row[2]), int(row[3])
            except (ValueError, IndexError):
                bad_lines.append(lineno)
                continue
            frames.setdefault(frame, []).append((x, y))
    if bad_lines:
        raise InputError(f"{path}: malformed rows at lines {bad_lines}")
    return {f: np.array(pts, dtype=np.int64) for f, pts in frames.items()}
