"""Leave-one-subject-out benchmark harness.

Folds hold out every subject once, in ascending subject-id order.
Supervised methods train per fold on the remaining subjects' videos
(positive windows centered on each ground truth, seeded negatives sampled
at least a window away from any ground truth), then spot the held-out
videos.  Counts are summed over folds and metrics computed from the sums
(cumulative protocol); matching runs under both hit criteria so reports
carry center- and iou-based rows side by side.

For a fixed manifest, method and seed the whole run is deterministic:
worker parallelism only fans out independent per-video work and results
are reduced in manifest order.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import io as mespot_io
from .errors import ConfigurationError
from .metrics import (
    DetPoint,
    EvalConfig,
    EvalCounts,
    det_points,
    frame_accuracy,
    match,
    prf1,
)
from .model import DatasetManifest, DatasetStats, Detection, FrameSequence, LandmarkTrack
from .spotters import SpotterConfig, spot_landmarks, spot_lbp_chi2, spot_mdmd
from .stfeatures import (
    FEATURE_KINDS,
    LinearModel,
    StFeatureConfig,
    TrainConfig,
    extract_st_feature,
    spot_supervised,
    train_linear,
)
from .version import VERSION

UNSUPERVISED_METHODS = ("lbp-chi2", "mdmd", "landmark")
METHODS = UNSUPERVISED_METHODS + FEATURE_KINDS


@dataclass(frozen=True)
class FoldSplit:
    """One leave-one-subject-out fold."""

    held_out_subject: str
    train_videos: tuple[str, ...]
    test_videos: tuple[str, ...]


@dataclass(frozen=True)
class SpotterSpec:
    """A named spotting method plus every config it needs."""

    method: str
    spotter: SpotterConfig = SpotterConfig()
    features: StFeatureConfig = StFeatureConfig()
    train: TrainConfig = TrainConfig()

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigurationError(
                f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method in FEATURE_KINDS and self.features.kind != self.method:
            object.__setattr__(self, "features", replace(self.features, kind=self.method))

    @property
    def supervised(self) -> bool:
        return self.method in FEATURE_KINDS


@dataclass(frozen=True)
class CriterionResult:
    """Cumulative evaluation under one hit criterion."""

    criterion: str
    fold_counts: tuple[tuple[str, EvalCounts], ...]
    counts: EvalCounts
    precision: float
    recall: float
    f1: float
    frame_accuracy: float | None


@dataclass(frozen=True)
class BenchmarkReport:
    method: str
    version: str
    stats: DatasetStats
    config_echo: tuple[tuple[str, str], ...]
    results: tuple[CriterionResult, ...]
    det: tuple[DetPoint, ...]
    detections: tuple[Detection, ...]

    def result(self, criterion: str) -> CriterionResult:
        for res in self.results:
            if res.criterion == criterion:
                return res
        raise KeyError(criterion)


def loso_folds(manifest: DatasetManifest) -> list[FoldSplit]:
    """One fold per subject, ordered by subject id; needs >= 2 subjects.

    Every video lands in exactly one test split, so fold test sets
    partition the dataset.
    """
    subjects = manifest.subjects
    if len(subjects) < 2:
        raise ConfigurationError(
            f"leave-one-subject-out needs at least 2 subjects, got {len(subjects)}")
    folds = []
    for subject in subjects:
        test = tuple(r.video_id for r in manifest.videos if r.subject_id == subject)
        train = tuple(r.video_id for r in manifest.videos if r.subject_id != subject)
        folds.append(FoldSplit(held_out_subject=subject, train_videos=train,
                               test_videos=test))
    return folds


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    """Order-preserving map, threaded when workers > 1."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# supervised training set
# ---------------------------------------------------------------------------

def _negative_centers(n_frames: int, window: int,
                      gts: Sequence, count: int, rng: np.random.Generator) -> list[int]:
    half = (window - 1) // 2
    centers = np.arange(half, n_frames - (window - 1 - half))
    allowed = np.ones(len(centers), dtype=bool)
    for gt in gts:
        allowed &= (centers < gt.onset - window) | (centers > gt.offset + window)
    pool = centers[allowed]
    if len(pool) == 0:
        return []
    picks = rng.choice(pool, size=min(count, len(pool)), replace=False)
    return sorted(int(c) for c in picks)


def build_training_set(manifest: DatasetManifest, video_ids: Iterable[str],
                       frames: dict[str, FrameSequence], st_cfg: StFeatureConfig,
                       train_cfg: TrainConfig,
                       workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Window features and +-1 labels for the given training videos.

    One positive window is centered on each ground truth (clipped to the
    video); negatives_per_positive negatives are drawn per positive from
    centers at least a window away from every ground-truth interval, using
    a stream seeded by (train seed, video id), so the set is independent of
    fold composition.
    """
    window = st_cfg.window_length
    jobs: list[tuple[str, int]] = []  # (video_id, window start), label implied by order
    labels: list[int] = []
    for vid in video_ids:
        seq = frames[vid]
        gts = manifest.samples_for(vid)
        if not gts:
            continue
        if len(seq) < window:
            raise ConfigurationError(
                f"video {vid!r} has {len(seq)} frames, shorter than the "
                f"{window}-frame training window")
        rng = np.random.default_rng(
            np.random.SeedSequence([train_cfg.seed, zlib.crc32(vid.encode())]))
        for gt in gts:
            start = min(max(gt.center - (window - 1) // 2, 0), len(seq) - window)
            jobs.append((vid, start))
            labels.append(1)
        negatives = _negative_centers(len(seq), window, gts,
                                      train_cfg.negatives_per_positive * len(gts), rng)
        for center in negatives:
            jobs.append((vid, center - (window - 1) // 2))
            labels.append(-1)

    if not any(lbl > 0 for lbl in labels):
        raise ConfigurationError("training videos contain no ground-truth samples")

    def job_feature(job: tuple[str, int]) -> np.ndarray:
        vid, start = job
        return extract_st_feature(frames[vid].frames[start:start + window], st_cfg)

    features = np.stack(_map(job_feature, jobs, workers))
    return features, np.asarray(labels)


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

def _spot_video(spec: SpotterSpec, seq: FrameSequence | None,
                track: LandmarkTrack | None,
                model: LinearModel | None) -> list[Detection]:
    if spec.method == "lbp-chi2":
        return spot_lbp_chi2(seq, spec.spotter)
    if spec.method == "mdmd":
        return spot_mdmd(seq, spec.spotter)
    if spec.method == "landmark":
        return spot_landmarks(track, spec.spotter)
    return spot_supervised(seq, model, spec.features)


def _config_echo(spec: SpotterSpec, eval_cfg: EvalConfig) -> tuple[tuple[str, str], ...]:
    echo = {"method": spec.method, "version": VERSION}
    for prefix, cfg in (("eval", eval_cfg), ("spotter", spec.spotter),
                        ("features", spec.features), ("train", spec.train)):
        for key, value in asdict(cfg).items():
            echo[f"{prefix}.{key}"] = repr(value)
    return tuple(sorted(echo.items()))


def evaluate_detections(manifest: DatasetManifest,
                        fold_groups: Sequence[tuple[str, Sequence[str]]],
                        detections: dict[str, Sequence[Detection]],
                        eval_cfg: EvalConfig) -> tuple[tuple[CriterionResult, ...],
                                                       tuple[DetPoint, ...]]:
    """Cumulative results under both criteria plus DET points.

    ``fold_groups`` names each fold and lists its videos; a plain (non-LOSO)
    evaluation passes a single group with every video.
    """
    results = []
    for criterion in ("center", "iou"):
        cfg = replace(eval_cfg, criterion=criterion)
        fold_counts = []
        overall = EvalCounts()
        pairs: list = []
        for name, vids in fold_groups:
            counts = EvalCounts()
            for vid in vids:
                res = match(manifest.samples_for(vid), list(detections.get(vid, [])), cfg)
                counts += res.counts
                pairs.extend(res.pairs)
            fold_counts.append((name, counts))
            overall += counts
        precision, recall, f1 = prf1(overall)
        frame_f = frame_accuracy(pairs, eval_cfg.apex_mode) if pairs else None
        results.append(CriterionResult(
            criterion=criterion, fold_counts=tuple(fold_counts), counts=overall,
            precision=precision, recall=recall, f1=f1, frame_accuracy=frame_f))

    runs = [[(manifest.samples_for(vid), list(detections.get(vid, [])))
             for vid in vids] for _, vids in fold_groups]
    det = tuple(det_points(runs, manifest.stats, eval_cfg))
    return tuple(results), det


def run_benchmark(manifest: DatasetManifest, spec: SpotterSpec,
                  eval_cfg: EvalConfig = EvalConfig(),
                  landmarks: dict[str, LandmarkTrack] | None = None,
                  workers: int = 1) -> BenchmarkReport:
    """Full LOSO benchmark: fold, (train,) spot, match, aggregate."""
    folds = loso_folds(manifest)

    tracks: dict[str, LandmarkTrack] = {}
    frames: dict[str, FrameSequence] = {}
    if spec.method == "landmark":
        landmarks = landmarks or {}
        for rec in manifest.videos:
            track = landmarks.get(rec.video_id)
            if track is None:
                raise ConfigurationError(
                    f"landmark method needs a track for video {rec.video_id!r}")
            tracks[rec.video_id] = track
    else:
        # Resolve every video's storage before any fold runs.
        for rec in manifest.videos:
            frames[rec.video_id] = mespot_io.load_frames(rec, manifest.base_dir)

    detections: dict[str, list[Detection]] = {}
    for fold in folds:
        model = None
        if spec.supervised:
            feats, labels = build_training_set(manifest, fold.train_videos, frames,
                                               spec.features, spec.train, workers)
            model = train_linear(feats, labels, spec.features, spec.train)

        def spot(vid: str) -> list[Detection]:
            return _spot_video(spec, frames.get(vid), tracks.get(vid), model)

        for vid, dets in zip(fold.test_videos,
                             _map(spot, fold.test_videos, workers)):
            detections[vid] = dets

    fold_groups = [(fold.held_out_subject, fold.test_videos) for fold in folds]
    results, det = evaluate_detections(manifest, fold_groups, detections, eval_cfg)

    ordered = [d for rec in manifest.videos
               for d in detections.get(rec.video_id, [])]
    return BenchmarkReport(
        method=spec.method, version=VERSION, stats=manifest.stats,
        config_echo=_config_echo(spec, eval_cfg), results=results, det=det,
        detections=tuple(ordered))


# ---------------------------------------------------------------------------
# report rendering
# ---------------------------------------------------------------------------

METRICS_HEADER = "criterion,TP,FP,FN,precision,recall,f1,frame_F"
DET_HEADER = "threshold,fppv,miss_rate"


def render_metrics_csv(report: BenchmarkReport) -> str:
    lines = [METRICS_HEADER]
    for res in report.results:
        frame_f = "" if res.frame_accuracy is None else repr(res.frame_accuracy)
        lines.append(f"{res.criterion},{res.counts.tp},{res.counts.fp},{res.counts.fn},"
                     f"{res.precision!r},{res.recall!r},{res.f1!r},{frame_f}")
    return "\n".join(lines) + "\n"


def render_det_csv(report: BenchmarkReport) -> str:
    lines = [DET_HEADER]
    for point in report.det:
        lines.append(f"{point.threshold!r},{point.fppv!r},{point.miss_rate!r}")
    return "\n".join(lines) + "\n"


def render_summary(report: BenchmarkReport) -> str:
    lines = [
        f"mespot benchmark report (version {report.version})",
        f"method: {report.method}",
        f"dataset: {report.stats.videos} videos, {report.stats.subjects} subjects, "
        f"{report.stats.samples} ground-truth samples",
        "",
    ]
    for res in report.results:
        lines.append(f"[criterion: {res.criterion}]")
        for subject, counts in res.fold_counts:
            lines.append(f"  fold {subject}: TP={counts.tp} FP={counts.fp} FN={counts.fn}")
        lines.append(f"  overall: TP={res.counts.tp} FP={res.counts.fp} FN={res.counts.fn}")
        lines.append(f"  precision={res.precision:.6f} recall={res.recall:.6f} "
                     f"f1={res.f1:.6f}")
        lines.append("  frame accuracy: " +
                     ("undefined (no matched pairs)" if res.frame_accuracy is None
                      else f"{res.frame_accuracy:.6f}"))
        lines.append("")
    if report.det:
        lines.append(f"DET: {len(report.det)} operating points "
                     f"(thresholds {report.det[-1].threshold!r} .. {report.det[0].threshold!r})")
        lines.append("")
    lines.append("[config]")
    lines.extend(f"  {key}={value}" for key, value in report.config_echo)
    return "\n".join(lines) + "\n"


def render_report(report: BenchmarkReport, out_dir: str | Path,
                  formats: Sequence[str] = ("summary", "metrics", "det")) -> dict[str, Path]:
    """Write the report files; returns the paths written keyed by format."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    renderers = {
        "summary": ("report.txt", render_summary),
        "metrics": ("metrics.csv", render_metrics_csv),
        "det": ("det.csv", render_det_csv),
    }
    written: dict[str, Path] = {}
    for fmt in formats:
        if fmt not in renderers:
            raise ValueError(f"unknown report format {fmt!r}; "
                             f"expected subset of {sorted(renderers)}")
        name, renderer = renderers[fmt]
        path = out_dir / name
        mespot_io.atomic_write_text(path, renderer(report))
        written[fmt] = path
    return written
