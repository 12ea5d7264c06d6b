"""Unsupervised baseline spotters.

Every spotter turns a video into a per-frame score curve, thresholds it
adaptively, and reports fixed-length detections at the surviving peaks:

* ``spot_lbp_chi2`` — appearance contrast: chi-square distance between the
  current frame's block-LBP histograms and the average of the histograms at
  the window's head and tail frames.
* ``spot_mdmd`` — motion contrast: block-matching displacement fields,
  scored by the mean of the largest third of magnitudes in the dominant
  motion direction, current-vs-head minus tail-vs-head.
* ``spot_landmarks`` — geometry contrast: deviation of six facial distance
  ratios from the window's reference frame.

The adaptive threshold is T = mean + p * (max - mean) over the curve, and
peaks must be strict local maxima over a +-floor(L/2) neighborhood.
Temporal non-maximum suppression keeps the highest-scoring detections with
centers at least L frames apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CoverageError, SequenceTooShortError
from .model import Detection, FrameSequence, LandmarkTrack
from .texture import LBP_BINS, block_index_map, lbp_block_histograms, lbp_code_image

__all__ = [
    "SpotterConfig", "ScoreCurve", "lbp_block_histograms", "chi2_contrast_curve",
    "threshold_peaks", "nms", "spot_lbp_chi2", "mdmd_curve", "spot_mdmd",
    "landmark_deviation_curve", "spot_landmarks", "feature_engineering_apex",
]


@dataclass(frozen=True)
class SpotterConfig:
    """Knobs shared by the unsupervised spotters.

    window_length is both the sliding-window extent and the length assigned
    to emitted detections; half-window parameters default to half of it.
    """

    window_length: int = 35
    half_window: int = 17
    lbp_grid: int = 6
    peak_fraction: float = 0.5
    mdmd_step: int = 17
    mdmd_bins: int = 8
    mdmd_search_radius: int = 3
    landmark_window: int = 35

    def __post_init__(self) -> None:
        if self.window_length < 3:
            raise ValueError(f"window_length must be >= 3, got {self.window_length}")
        if self.half_window < 1:
            raise ValueError(f"half_window must be >= 1, got {self.half_window}")
        if self.lbp_grid < 1:
            raise ValueError(f"lbp_grid must be >= 1, got {self.lbp_grid}")
        if not (0.0 <= self.peak_fraction <= 1.0):
            raise ValueError(f"peak_fraction must be in [0, 1], got {self.peak_fraction}")
        if self.mdmd_step < 1:
            raise ValueError(f"mdmd_step must be >= 1, got {self.mdmd_step}")
        if self.mdmd_bins < 2:
            raise ValueError(f"mdmd_bins must be >= 2, got {self.mdmd_bins}")
        if self.mdmd_search_radius < 1:
            raise ValueError(f"mdmd_search_radius must be >= 1, got {self.mdmd_search_radius}")
        if self.landmark_window < 2:
            raise ValueError(f"landmark_window must be >= 2, got {self.landmark_window}")


@dataclass(frozen=True)
class ScoreCurve:
    """Per-frame spotting scores; positions where no window fits stay 0."""

    video_id: str
    values: np.ndarray
    window_length: int

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError(f"curve values must be 1-d, got shape {values.shape}")
        values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# LBP chi-square contrast
# ---------------------------------------------------------------------------

def chi2_contrast_curve(seq: FrameSequence, cfg: SpotterConfig = SpotterConfig()) -> ScoreCurve:
    """Chi-square contrast between each frame and its window's head/tail average.

    For a window of length L centered (floor convention) on frame i, the
    score is sum over blocks of chi2(hist(CF), (hist(HF) + hist(TF)) / 2)
    where CF/HF/TF are the window's center, first and last frames.
    """
    n = len(seq)
    L = cfg.window_length
    if n <= L:
        raise SequenceTooShortError(
            f"{seq.video_id}: need more than {L} frames for the contrast window, got {n}")
    half = (L - 1) // 2

    hists = np.stack([lbp_block_histograms(f, cfg.lbp_grid) for f in seq.frames])

    values = np.zeros(n, dtype=np.float64)
    starts = np.arange(0, n - L + 1)
    centers = starts + half
    # Chunked so the intermediate difference arrays stay small.
    for lo in range(0, len(starts), 256):
        sel = slice(lo, min(lo + 256, len(starts)))
        cf = hists[centers[sel]]
        avg = 0.5 * (hists[starts[sel]] + hists[starts[sel] + L - 1])
        num = (cf - avg) ** 2
        den = cf + avg
        terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        values[centers[sel]] = terms.sum(axis=(1, 2))
    return ScoreCurve(video_id=seq.video_id, values=values, window_length=L)


def threshold_peaks(curve: ScoreCurve,
                    cfg: SpotterConfig = SpotterConfig()) -> list[tuple[int, float]]:
    """Isolated peaks above the adaptive threshold T = mean + p * (max - mean).

    A peak must be strictly above T and strictly greater than every other
    value within +-floor(L/2) frames, so plateaus yield nothing.
    """
    values = curve.values
    if len(values) == 0 or not np.any(values):
        return []
    mean = float(values.mean())
    threshold = mean + cfg.peak_fraction * (float(values.max()) - mean)
    w = curve.window_length // 2

    peaks = []
    for i in np.nonzero(values > threshold)[0]:
        lo = max(0, i - w)
        window = values[lo:i + w + 1]
        if np.count_nonzero(window == values[i]) == 1 and values[i] == window.max():
            peaks.append((int(i), float(values[i])))
    return peaks


def nms(detections: Sequence[Detection], spacing: int) -> list[Detection]:
    """Temporal non-maximum suppression.

    Detections are visited in descending score (ties: lower center first)
    and kept iff their center is at least ``spacing`` frames from every
    center already kept.  The survivors come back in center order.
    """
    if spacing < 1:
        raise ValueError(f"spacing must be >= 1, got {spacing}")
    ranked = sorted(detections, key=lambda d: (-d.score, d.center, d.length))
    kept: list[Detection] = []
    for det in ranked:
        if all(abs(det.center - other.center) >= spacing for other in kept):
            kept.append(det)
    return sorted(kept, key=lambda d: d.center)


def _peaks_to_detections(seq_id: str, peaks: Sequence[tuple[int, float]],
                         length: int) -> list[Detection]:
    return [Detection(video_id=seq_id, center=idx, length=length, score=score)
            for idx, score in peaks]


def spot_lbp_chi2(seq: FrameSequence,
                  cfg: SpotterConfig = SpotterConfig()) -> list[Detection]:
    """LBP chi-square spotter: contrast curve -> adaptive peaks -> NMS."""
    curve = chi2_contrast_curve(seq, cfg)
    peaks = threshold_peaks(curve, cfg)
    dets = _peaks_to_detections(seq.video_id, peaks, cfg.window_length)
    return nms(dets, cfg.window_length)


# ---------------------------------------------------------------------------
# main directional maximal difference (block-matching form)
# ---------------------------------------------------------------------------

def _displacement_field(a: np.ndarray, b: np.ndarray, grid: int,
                        radius: int) -> np.ndarray:
    """Per-block integer displacement (dx, dy) from frame a to frame b.

    Exhaustive search over [-radius, radius]^2 minimizing the sum of
    absolute differences; ties prefer the smallest displacement (then
    lexicographic), so a static pair always yields zeros.
    """
    h, w = a.shape
    r = radius
    if h <= 2 * r or w <= 2 * r:
        raise ValueError(f"frame {h}x{w} too small for search radius {r}")
    core_a = a[r:h - r, r:w - r].astype(np.int32)
    blocks = block_index_map(h, w, grid)[r:h - r, r:w - r].ravel()
    n_blocks = grid * grid

    offsets = sorted(((dx * dx + dy * dy, dy, dx)
                      for dy in range(-r, r + 1) for dx in range(-r, r + 1)))
    best_sad = np.full(n_blocks, np.inf)
    best = np.zeros((n_blocks, 2), dtype=np.int64)
    for _, dy, dx in offsets:
        shifted = b[r + dy:h - r + dy, r + dx:w - r + dx].astype(np.int32)
        sad = np.bincount(blocks, weights=np.abs(core_a - shifted).ravel(),
                          minlength=n_blocks)
        better = sad < best_sad
        best_sad[better] = sad[better]
        best[better] = (dx, dy)
    return best


def _main_direction_feature(vectors: np.ndarray, bins: int) -> float:
    """Mean of the largest third of magnitudes in the most populated direction bin.

    Zero-length vectors carry no direction and do not vote; if nothing
    moved the feature is 0.
    """
    dx = vectors[:, 0].astype(np.float64)
    dy = vectors[:, 1].astype(np.float64)
    mags = np.hypot(dx, dy)
    moving = mags > 0
    if not np.any(moving):
        return 0.0
    angles = np.mod(np.arctan2(dy[moving], dx[moving]), 2 * np.pi)
    sector = 2 * np.pi / bins
    direction = (np.floor(angles / sector + 0.5).astype(np.int64)) % bins
    main = int(np.argmax(np.bincount(direction, minlength=bins)))
    main_mags = np.sort(mags[moving][direction == main])[::-1]
    top = max(1, math.ceil(len(main_mags) / 3))
    return float(main_mags[:top].mean())


def mdmd_curve(seq: FrameSequence, cfg: SpotterConfig = SpotterConfig()) -> ScoreCurve:
    """Main-directional motion contrast via block matching.

    score_i = max(0, feature(field from frame i-k to i)
                   - feature(field from frame i-k to i+k))
    with k = cfg.mdmd_step; frames where either comparison frame falls
    outside the video score 0.
    """
    n = len(seq)
    k = cfg.mdmd_step
    if n <= 2 * k:
        raise SequenceTooShortError(
            f"{seq.video_id}: need more than {2 * k} frames for mdmd_step {k}, got {n}")
    frames = seq.frames
    values = np.zeros(n, dtype=np.float64)
    for i in range(k, n - k):
        head = frames[i - k]
        onset_field = _displacement_field(head, frames[i], cfg.lbp_grid,
                                          cfg.mdmd_search_radius)
        baseline_field = _displacement_field(head, frames[i + k], cfg.lbp_grid,
                                             cfg.mdmd_search_radius)
        contrast = (_main_direction_feature(onset_field, cfg.mdmd_bins)
                    - _main_direction_feature(baseline_field, cfg.mdmd_bins))
        values[i] = max(0.0, contrast)
    return ScoreCurve(video_id=seq.video_id, values=values,
                      window_length=cfg.window_length)


def spot_mdmd(seq: FrameSequence,
              cfg: SpotterConfig = SpotterConfig()) -> list[Detection]:
    """Motion-contrast spotter: mdmd curve -> adaptive peaks -> NMS."""
    curve = mdmd_curve(seq, cfg)
    peaks = threshold_peaks(curve, cfg)
    dets = _peaks_to_detections(seq.video_id, peaks, cfg.window_length)
    return nms(dets, cfg.window_length)


# ---------------------------------------------------------------------------
# landmark distance ratios
# ---------------------------------------------------------------------------

def _landmark_distances(points: np.ndarray) -> np.ndarray:
    """Six expression-sensitive distances from a 68-point landmark frame.

    Two eyebrow-to-eye gaps, two eye apertures, mouth width and mouth
    height; all change under brow raises, blinks and mouth movement but not
    under global translation.
    """
    y = points[:, 1]
    right_brow_gap = abs(y[17:22].mean() - y[36:42].mean())
    left_brow_gap = abs(y[22:27].mean() - y[42:48].mean())
    right_aperture = abs(y[[37, 38]].mean() - y[[40, 41]].mean())
    left_aperture = abs(y[[43, 44]].mean() - y[[46, 47]].mean())
    mouth_width = float(np.linalg.norm(points[54] - points[48]))
    mouth_height = float(np.linalg.norm(points[57] - points[51]))
    return np.array([right_brow_gap, left_brow_gap, right_aperture,
                     left_aperture, mouth_width, mouth_height])


def landmark_deviation_curve(track: LandmarkTrack,
                             cfg: SpotterConfig = SpotterConfig()) -> ScoreCurve:
    """L2 deviation of the six distance ratios from the window's first frame.

    For frame i the reference is the first frame of the window centered on
    i; score_i = ||d(i) / d(ref) - 1||_2.  Reference distances of zero
    contribute a neutral ratio of 1.
    """
    if track.frame_indices is not None:
        raise CoverageError(
            f"{track.video_id}: landmark spotting needs one entry per frame")
    if track.n_points != 68:
        raise ValueError(
            f"{track.video_id}: landmark spotting needs the 68-point layout, "
            f"got {track.n_points}")
    n = len(track)
    L = cfg.landmark_window
    if n <= L:
        raise SequenceTooShortError(
            f"{track.video_id}: need more than {L} landmark frames, got {n}")
    half = (L - 1) // 2

    distances = np.stack([_landmark_distances(track.points[i]) for i in range(n)])
    values = np.zeros(n, dtype=np.float64)
    for i in range(half, n - (L - 1 - half)):
        ref = distances[i - half]
        cur = distances[i]
        ratios = np.divide(cur, ref, out=np.ones_like(cur), where=ref > 0)
        values[i] = float(np.linalg.norm(ratios - 1.0))
    return ScoreCurve(video_id=track.video_id, values=values, window_length=L)


def spot_landmarks(track: LandmarkTrack,
                   cfg: SpotterConfig = SpotterConfig()) -> list[Detection]:
    """Geometry spotter: ratio-deviation curve -> adaptive peaks."""
    curve = landmark_deviation_curve(track, cfg)
    peaks = threshold_peaks(curve, cfg)
    return _peaks_to_detections(track.video_id, peaks, cfg.landmark_window)


# ---------------------------------------------------------------------------
# apex selection over per-frame feature differences
# ---------------------------------------------------------------------------

def feature_engineering_apex(features: np.ndarray, half_window: int) -> tuple[int, float]:
    """Apex frame of a window from per-frame feature rows.

    A_i is the squared L2 distance of row i from row 0; B_i sums A over
    [i - h, i + h - 1].  The apex is the index with maximal B among indices
    where the sum window fits (ties: lowest index) and the score is that
    maximal B.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-d, got shape {features.shape}")
    h = half_window
    if h < 1:
        raise ValueError(f"half_window must be >= 1, got {h}")
    n = features.shape[0]
    if n <= 2 * h:
        raise SequenceTooShortError(
            f"need more than {2 * h} feature rows for half_window {h}, got {n}")

    diffs = ((features - features[0]) ** 2).sum(axis=1)
    csum = np.concatenate([[0.0], np.cumsum(diffs)])
    idx = np.arange(h, n - h + 1)
    sums = csum[idx + h] - csum[idx - h]
    best = int(np.argmax(sums))
    return int(idx[best]), float(sums[best])
