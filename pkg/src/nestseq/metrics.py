"""AUROC, AUPRC and log loss with pinned tie/edge semantics.

* AUROC: Mann-Whitney statistic, ties count 1/2, via average ranks.
* AUPRC: step-interpolated average precision. Scores are sorted descending
  with ties broken by original position (earlier first), and
  ``AP = sum_k (R_k - R_{k-1}) P_k`` over the ranks that hit a positive.
* Log loss: mean cross-entropy with probabilities clipped to
  ``[1e-15, 1 - 1e-15]``.
"""
from __future__ import annotations

import numpy as np

CLIP = 1e-15


class MetricError(ValueError):
    pass


def _prep(scores, labels):
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).astype(bool).reshape(-1)
    if s.shape != y.shape:
        raise MetricError(f"scores ({s.size}) and labels ({y.size}) differ in length")
    if s.size == 0:
        raise MetricError("need at least one scored label")
    if not np.all(np.isfinite(s)):
        raise MetricError("scores must be finite")
    return s, y


def average_ranks(x):
    """1-based ranks with ties sharing their mean rank."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    boundaries = np.flatnonzero(np.diff(xs)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [xs.size]])
    ranks = np.empty(xs.size)
    ranks[order] = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    return ranks


def auroc(scores, labels):
    s, y = _prep(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUROC is undefined unless both classes are present")
    r = average_ranks(s)
    u = r[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(scores, labels):
    s, y = _prep(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise MetricError("AUPRC is undefined without positives")
    order = np.lexsort((np.arange(s.size), -s))
    hits = y[order]
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, s.size + 1)
    return float(precision[hits].sum() / n_pos)


def log_loss(scores, labels):
    s, y = _prep(scores, labels)
    p = np.clip(s, CLIP, 1.0 - CLIP)
    return float(-np.mean(np.where(y, np.log(p), np.log1p(-p))))


def summarize(scores, labels):
    """All three metrics plus sample count and prevalence.

    AUROC/AUPRC come back as ``nan`` when a class is missing rather than
    raising, so per-epoch logging never aborts a run.
    """
    s, y = _prep(scores, labels)
    out = {"n": int(y.size), "prevalence": float(y.mean()), "log_loss": log_loss(s, y)}
    try:
        out["auroc"] = auroc(s, y)
    except MetricError:
        out["auroc"] = float("nan")
    try:
        out["auprc"] = auprc(s, y)
    except MetricError:
        out["auprc"] = float("nan")
    return out
