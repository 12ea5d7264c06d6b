"""Spotting evaluation: interval IoU, greedy matching, cumulative P/R/F1,
frame-level localization accuracy and DET operating points.

Two hit criteria are supported:

* ``center``: a detection hits a ground truth when its center lies within
  half the ground-truth length of the ground-truth center,
  |C_w - C_gt| <= 0.5 * L_gt.
* ``iou``: intersection-over-union of the inclusive intervals reaches a
  threshold epsilon (0.5 by default).

Matching is one-to-one and greedy: candidate pairs are ordered by hit
quality (ascending center distance, or descending IoU) with deterministic
tie-breaking, and each ground truth / detection is consumed at most once.
Precision, recall and F1 are computed from counts accumulated over all
folds (cumulative protocol), never averaged per fold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, UndefinedMetricError
from .model import DatasetStats, Detection, GroundTruthSample

CRITERIA = ("center", "iou")


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation protocol parameters.

    apex_mode drops the length term from frame accuracy, for spotters that
    report a single apex frame rather than a full interval estimate.
    """

    criterion: str = "center"
    iou_threshold: float = 0.5
    apex_mode: bool = False

    def __post_init__(self) -> None:
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if not (0.0 < self.iou_threshold <= 1.0):
            raise ValueError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")


@dataclass(frozen=True)
class EvalCounts:
    """TP/FP/FN totals; addition sums component-wise for fold aggregation."""

    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one video's detections against its ground truth."""

    pairs: tuple[tuple[GroundTruthSample, Detection], ...]
    unmatched_gt: tuple[GroundTruthSample, ...]
    unmatched_det: tuple[Detection, ...]

    @property
    def counts(self) -> EvalCounts:
        return EvalCounts(tp=len(self.pairs), fp=len(self.unmatched_det),
                          fn=len(self.unmatched_gt))


@dataclass(frozen=True)
class DetPoint:
    """One DET operating point: detections kept at score >= threshold."""

    threshold: float
    fppv: float
    miss_rate: float


def iou(a: tuple[int, int], b: tuple[int, int]) -> float:
    """IoU of two inclusive frame intervals, each given as (onset, offset)."""
    for onset, offset in (a, b):
        if offset < onset:
            raise ValueError(f"offset {offset} precedes onset {onset}")
    lo = max(a[0], b[0])
    hi = min(a[1], b[1])
    inter = max(0, hi - lo + 1)
    union = (a[1] - a[0] + 1) + (b[1] - b[0] + 1) - inter
    return inter / union


def _hit(gt: GroundTruthSample, det: Detection, cfg: EvalConfig) -> tuple[bool, float]:
    """Return (is_candidate, quality). Lower quality sorts first."""
    if cfg.criterion == "center":
        dist = abs(det.center - gt.center)
        return dist <= 0.5 * gt.length, float(dist)
    overlap = iou(gt.interval, det.interval)
    return overlap >= cfg.iou_threshold, -overlap


def match(gts: Sequence[GroundTruthSample], dets: Sequence[Detection],
          cfg: EvalConfig) -> MatchResult:
    """Greedy one-to-one matching of one video's detections to its ground truth.

    Candidate pairs are consumed in ascending center distance (center
    criterion) or descending IoU (iou criterion); ties break on lower
    detection center, then lower ground-truth onset.  The result is
    invariant to the ordering of either input list.
    """
    vids = {g.video_id for g in gts} | {d.video_id for d in dets}
    if len(vids) > 1:
        raise ValueError(f"match() operates on a single video, got ids {sorted(vids)}")

    candidates = []
    for gi, gt in enumerate(gts):
        for di, det in enumerate(dets):
            ok, quality = _hit(gt, det, cfg)
            if ok:
                # Trailing fields only exist to make the order total, so the
                # outcome cannot depend on input permutation.
                key = (quality, det.center, gt.onset, det.length, det.score, gt.offset)
                candidates.append((key, gi, di))
    candidates.sort(key=lambda item: item[0])

    gt_used = [False] * len(gts)
    det_used = [False] * len(dets)
    pairs = []
    for _, gi, di in candidates:
        if gt_used[gi] or det_used[di]:
            continue
        gt_used[gi] = True
        det_used[di] = True
        pairs.append((gts[gi], dets[di]))

    return MatchResult(
        pairs=tuple(pairs),
        unmatched_gt=tuple(g for used, g in zip(gt_used, gts) if not used),
        unmatched_det=tuple(d for used, d in zip(det_used, dets) if not used),
    )


def prf1(counts: EvalCounts) -> tuple[float, float, float]:
    """Precision, recall and F1 from cumulative counts; zero denominators yield 0."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def frame_accuracy(pairs: Iterable[tuple[GroundTruthSample, Detection]],
                   apex_mode: bool = False) -> float:
    """Mean normalized localization error over matched (gt, detection) pairs.

    Interval mode averages (|C_w - C_gt| + |L_w - L_gt|) / (2 * L_gt); apex
    mode averages |C_w - C_gt| / L_gt.  Lower is better; 0 means every
    detection reproduced its ground truth exactly.
    """
    terms = []
    for gt, det in pairs:
        center_err = abs(det.center - gt.center)
        if apex_mode:
            terms.append(center_err / gt.length)
        else:
            terms.append((center_err + abs(det.length - gt.length)) / (2 * gt.length))
    if not terms:
        raise UndefinedMetricError("frame accuracy needs at least one matched pair")
    return float(np.mean(terms))


# One fold's worth of per-video evaluation inputs.
VideoPairs = Sequence[tuple[Sequence[GroundTruthSample], Sequence[Detection]]]


def det_points(runs: Sequence[VideoPairs], stats: DatasetStats, cfg: EvalConfig,
               thresholds: Sequence[float] | None = None) -> list[DetPoint]:
    """DET curve points for a scored benchmark run.

    ``runs`` groups (ground truths, detections) pairs per video within each
    fold.  For every threshold, detections scoring below it are discarded,
    matching reruns per video, and counts are summed over all folds:
    FPPV = sum(FP) / videos, miss rate = 1 - sum(TP) / samples.

    By default, thresholds are the distinct detection scores plus +inf (the
    zero-detection point), evaluated in descending order.
    """
    if stats.videos <= 0:
        raise ConfigurationError("DET needs a positive video count")
    if stats.samples <= 0:
        raise ConfigurationError("DET needs a positive ground-truth sample count")

    if thresholds is None:
        scores = {float(det.score) for fold in runs for _, dets in fold for det in dets}
        scores.add(float("inf"))
        thresholds = sorted(scores, reverse=True)
    else:
        thresholds = sorted({float(t) for t in thresholds}, reverse=True)

    points = []
    for thr in thresholds:
        tp = fp = 0
        for fold in runs:
            for gts, dets in fold:
                kept = [d for d in dets if d.score >= thr]
                counts = match(gts, kept, cfg).counts
                tp += counts.tp
                fp += counts.fp
        points.append(DetPoint(
            threshold=thr,
            fppv=fp / stats.videos,
            miss_rate=1.0 - tp / stats.samples,
        ))
    return points
