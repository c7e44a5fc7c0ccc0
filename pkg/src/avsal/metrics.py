"""Saliency evaluation metrics.

Fixations are (x, y) integer pixel coordinates (x is the column).  The
distribution metrics (cc, sim) compare a predicted map against a
rendered ground-truth map; the location metrics (nss, auc_judd, s_auc)
compare a predicted map against fixation points.

Conventions, fixed and relied on by the test oracles:

* nss uses the population standard deviation and averages the z-scored
  map over fixation *points* (a pixel fixated by two observers counts
  twice).  A constant map scores 0.
* auc_judd / s_auc operate on the set of distinct fixated *pixels*.
  Thresholds are the saliency values at those pixels plus a +inf
  sentinel; classification uses ``value >= threshold``.  Points
  (FPR, TPR) are completed with (0, 0) and (1, 1) and integrated by the
  trapezoid rule.
* auc_judd counts negatives over all non-fixated pixels:
  ``FPR = (|{p : P(p) >= t}| - TP) / (n_pixels - |F|)``.
* s_auc samples, per trial, ``|F|`` negatives uniformly *with
  replacement* from the shuffle pool (candidate pixels minus the true
  fixated pixels, deduplicated and sorted in row-major y*W+x order)
  using one PCG64 generator seeded once; trial AUCs are averaged.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError


def _as_points(fixations) -> np.ndarray:
    pts = np.asarray(fixations, dtype=np.int64)
    if pts.size == 0:
        raise InputError("metric undefined for an empty fixation set")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError(f"fixations must be (n, 2) of (x, y), got {pts.shape}")
    return pts


def _check_bounds(pts: np.ndarray, shape) -> None:
    h, w = shape
    if (pts[:, 0] < 0).any() or (pts[:, 0] >= w).any() \
            or (pts[:, 1] < 0).any() or (pts[:, 1] >= h).any():
        raise InputError(f"fixation outside the {w}x{h} map")


def _unique_pixels(pts: np.ndarray, width: int) -> np.ndarray:
    """Distinct fixated pixels in row-major order, as (n, 2) of (x, y)."""
    flat = np.unique(pts[:, 1].astype(np.int64) * width + pts[:, 0])
    return np.stack([flat % width, flat // width], axis=1)


def nss(saliency: np.ndarray, fixations) -> float:
    """Mean of the z-scored map at the fixation points."""
    s = np.asarray(saliency, dtype=np.float64)
    pts = _as_points(fixations)
    _check_bounds(pts, s.shape)
    # constancy is checked on the values, not on the computed std: the
    # mean of n identical floats can round, leaving a tiny nonzero std
    if s.max() == s.min():
        return 0.0
    std = s.std()
    if std == 0.0:
        return 0.0
    z = (s - s.mean()) / std
    return float(z[pts[:, 1], pts[:, 0]].mean())


def cc(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation between two maps; 0 if either is constant."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InputError(f"map shapes differ: {a.shape} vs {b.shape}")
    if a.max() == a.min() or b.max() == b.min():
        return 0.0
    da, db = a - a.mean(), b - b.mean()
    va, vb = (da * da).sum(), (db * db).sum()
    if va == 0.0 or vb == 0.0:
        return 0.0
    return float((da * db).sum() / np.sqrt(va * vb))


def sim(a: np.ndarray, b: np.ndarray) -> float:
    """Histogram intersection of the sum-normalized maps."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"map shapes differ: {a.shape} vs {b.shape}")
    sa, sb = a.sum(), b.sum()
    if sa <= 0 or sb <= 0 or (a < 0).any() or (b < 0).any():
        raise InputError("sim needs nonnegative maps with positive sums")
    return float(np.minimum(a / sa, b / sb).sum())


def _roc_area(pos_vals: np.ndarray, tpr_fn, fpr_fn) -> float:
    """Threshold sweep over positive values (+inf sentinel), trapezoid area."""
    thresholds = np.concatenate([np.unique(pos_vals), [np.inf]])[::-1]
    tpr = np.array([tpr_fn(t) for t in thresholds])
    fpr = np.array([fpr_fn(t) for t in thresholds])
    fpr = np.concatenate([[0.0], fpr, [1.0]])
    tpr = np.concatenate([[0.0], tpr, [1.0]])
    return float(np.trapezoid(tpr, fpr))


def auc_judd(saliency: np.ndarray, fixations) -> float:
    """AUC with every non-fixated pixel acting as a negative."""
    s = np.asarray(saliency, dtype=np.float64)
    pts = _as_points(fixations)
    _check_bounds(pts, s.shape)
    pix = _unique_pixels(pts, s.shape[1])
    n_fix = pix.shape[0]
    n_pixels = s.size
    if n_fix >= n_pixels:
        raise InputError("auc_judd needs at least one non-fixated pixel")
    pos_vals = s[pix[:, 1], pix[:, 0]]
    flat = s.ravel()

    def tpr(t):
        return (pos_vals >= t).sum() / n_fix

    def fpr(t):
        tp = (pos_vals >= t).sum()
        return ((flat >= t).sum() - tp) / (n_pixels - n_fix)

    return _roc_area(pos_vals, tpr, fpr)


def s_auc(saliency: np.ndarray, fixations, shuffle_pool, trials: int = 100,
          seed: int = 0) -> float:
    """Shuffled AUC: negatives are drawn from other recordings' fixations.

    ``shuffle_pool`` is an (m, 2) array of candidate (x, y) pixels; the
    true fixated pixels are removed before sampling.  See the module
    docstring for the exact sampling protocol.
    """
    s = np.asarray(saliency, dtype=np.float64)
    pts = _as_points(fixations)
    _check_bounds(pts, s.shape)
    pool = _as_points(shuffle_pool)
    _check_bounds(pool, s.shape)
    w = s.shape[1]
    pix = _unique_pixels(pts, w)
    pos_keys = set(pix[:, 1] * w + pix[:, 0])
    cand_keys = np.array(sorted(set(pool[:, 1] * w + pool[:, 0]) - pos_keys),
                         dtype=np.int64)
    if cand_keys.size == 0:
        raise InputError("shuffle pool has no pixels outside the fixation set")
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    pos_vals = s[pix[:, 1], pix[:, 0]]
    cand_vals = s.ravel()[cand_keys]
    n = pix.shape[0]
    rng = np.random.Generator(np.random.PCG64(seed))
    total = 0.0
    for _ in range(trials):
        neg_vals = cand_vals[rng.integers(0, cand_keys.size, size=n)]

        def tpr(t):
            return (pos_vals >= t).sum() / n

        def fpr(t):
            return (neg_vals >= t).sum() / n

        total += _roc_area(pos_vals, tpr, fpr)
    return total / trials


METRIC_NAMES = ("auc_judd", "sim", "s_auc", "cc", "nss")


def aggregate(groups) -> dict:
    """Frame-count-weighted means over {name: (frames, {metric: value})}."""
    out = {}
    total = sum(frames for frames, _ in groups.values())
    if total == 0:
        raise InputError("cannot aggregate over zero frames")
    for metric in METRIC_NAMES:
        acc = 0.0
        for frames, vals in groups.values():
            acc += frames * vals[metric]
        out[metric] = acc / total
    return out
