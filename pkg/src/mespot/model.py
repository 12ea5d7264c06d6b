"""Core domain types and interval arithmetic.

Frame indices are 0-based and intervals are inclusive on both ends: an
interval ``[onset, offset]`` spans ``offset - onset + 1`` frames.  The
canonical summary of an interval is its (center, length) pair with

    center = floor((onset + offset) / 2)
    length = offset - onset + 1

and the inverse reconstruction places the center in the canonical slot:

    onset  = center - floor((length - 1) / 2)
    offset = onset + length - 1

For even lengths the center frame is not unique; the floor convention makes
``interval -> (center, length) -> interval`` the identity on canonical
intervals, so round-tripping is stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def interval_to_center_length(onset: int, offset: int) -> tuple[int, int]:
    """Summarize an inclusive frame interval as (center, length)."""
    if onset < 0:
        raise ValueError(f"onset must be >= 0, got {onset}")
    if offset < onset:
        raise ValueError(f"offset {offset} precedes onset {onset}")
    return (onset + offset) // 2, offset - onset + 1


def center_length_to_interval(center: int, length: int) -> tuple[int, int]:
    """Reconstruct the canonical inclusive interval for a (center, length) pair."""
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    onset = center - (length - 1) // 2
    return onset, onset + length - 1


@dataclass(frozen=True)
class GroundTruthSample:
    """One annotated micro-expression interval."""

    video_id: str
    subject_id: str
    onset: int
    offset: int

    def __post_init__(self) -> None:
        if self.onset < 0:
            raise ValidationError(
                f"{self.video_id}: onset must be >= 0, got {self.onset}")
        if self.offset < self.onset:
            raise ValidationError(
                f"{self.video_id}: offset {self.offset} precedes onset {self.onset}")

    @property
    def center(self) -> int:
        return (self.onset + self.offset) // 2

    @property
    def length(self) -> int:
        return self.offset - self.onset + 1

    @property
    def interval(self) -> tuple[int, int]:
        return self.onset, self.offset


@dataclass(frozen=True)
class Detection:
    """One spotted interval, reported as (center, length) plus a confidence score."""

    video_id: str
    center: int
    length: int
    score: float

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValidationError(
                f"{self.video_id}: detection length must be >= 1, got {self.length}")
        if not math.isfinite(self.score):
            raise ValidationError(
                f"{self.video_id}: detection score must be finite, got {self.score}")

    @property
    def interval(self) -> tuple[int, int]:
        return center_length_to_interval(self.center, self.length)


@dataclass(frozen=True)
class FrameSequence:
    """A grayscale video held in memory as a (frames, height, width) uint8 array."""

    video_id: str
    fps: float
    frames: np.ndarray

    def __post_init__(self) -> None:
        if self.frames.ndim != 3:
            raise ValidationError(
                f"{self.video_id}: frames must be 3-d (t, h, w), got shape {self.frames.shape}")
        if self.frames.dtype != np.uint8:
            raise ValidationError(
                f"{self.video_id}: frames must be uint8, got {self.frames.dtype}")
        if len(self.frames) < 1:
            raise ValidationError(f"{self.video_id}: sequence has no frames")
        if not (self.fps > 0):
            raise ValidationError(f"{self.video_id}: fps must be positive, got {self.fps}")
        self.frames.setflags(write=False)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


@dataclass(frozen=True)
class VideoRecord:
    """Manifest row describing one video; frames live externally at frames_path."""

    video_id: str
    subject_id: str
    frame_count: int
    fps: float
    frames_path: str

    def __post_init__(self) -> None:
        for name, value in (("video_id", self.video_id), ("subject_id", self.subject_id)):
            if not value:
                raise ValidationError(f"{name} must be non-empty")
            if "," in value:
                raise ValidationError(f"{name} must not contain commas: {value!r}")
        if self.frame_count < 1:
            raise ValidationError(
                f"{self.video_id}: frame_count must be >= 1, got {self.frame_count}")
        if not (self.fps > 0):
            raise ValidationError(f"{self.video_id}: fps must be positive, got {self.fps}")
        if not self.frames_path:
            raise ValidationError(f"{self.video_id}: frames_path must be non-empty")


@dataclass(frozen=True)
class DatasetStats:
    """Denominators used by the cumulative protocol: video, subject and sample counts."""

    videos: int
    subjects: int
    samples: int


@dataclass(frozen=True)
class DatasetManifest:
    """A dataset: video records plus their ground-truth intervals.

    ``base_dir`` remembers where the manifest file lives so relative
    frames_path entries can be resolved later; it is not part of the dataset
    identity and is excluded from equality.
    """

    videos: tuple[VideoRecord, ...]
    ground_truth: tuple[GroundTruthSample, ...]
    base_dir: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "videos", tuple(self.videos))
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        by_id: dict[str, VideoRecord] = {}
        for rec in self.videos:
            if rec.video_id in by_id:
                raise ValidationError(f"duplicate video_id {rec.video_id!r}")
            by_id[rec.video_id] = rec
        for gt in self.ground_truth:
            rec = by_id.get(gt.video_id)
            if rec is None:
                raise ValidationError(
                    f"ground truth references unknown video_id {gt.video_id!r}")
            if gt.subject_id != rec.subject_id:
                raise ValidationError(
                    f"{gt.video_id}: ground truth subject {gt.subject_id!r} "
                    f"does not match video subject {rec.subject_id!r}")
            if gt.offset >= rec.frame_count:
                raise ValidationError(
                    f"{gt.video_id}: interval [{gt.onset}, {gt.offset}] exceeds "
                    f"frame count {rec.frame_count}")

    def video(self, video_id: str) -> VideoRecord:
        for rec in self.videos:
            if rec.video_id == video_id:
                return rec
        raise KeyError(video_id)

    def samples_for(self, video_id: str) -> list[GroundTruthSample]:
        return [gt for gt in self.ground_truth if gt.video_id == video_id]

    @property
    def subjects(self) -> list[str]:
        """Distinct subject ids in ascending order."""
        return sorted({rec.subject_id for rec in self.videos})

    @property
    def stats(self) -> DatasetStats:
        """Recomputed from contents; never cached or trusted from input files."""
        return DatasetStats(
            videos=len(self.videos),
            subjects=len(self.subjects),
            samples=len(self.ground_truth),
        )


@dataclass(frozen=True)
class LandmarkTrack:
    """Facial landmark coordinates per frame: a (frames, points, 2) float array.

    ``frame_indices`` is None for dense tracks (row i belongs to frame i) or a
    sorted array of the frames each row describes for sparse sampling.
    Coordinates are (x, y) in pixels.
    """

    video_id: str
    points: np.ndarray
    frame_indices: np.ndarray | None = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 3 or pts.shape[2] != 2:
            raise ValidationError(
                f"{self.video_id}: landmark array must be (frames, points, 2), "
                f"got shape {pts.shape}")
        if self.frame_indices is not None:
            idx = np.asarray(self.frame_indices, dtype=np.int64)
            object.__setattr__(self, "frame_indices", idx)
            if idx.shape != (pts.shape[0],):
                raise ValidationError(
                    f"{self.video_id}: frame_indices length {idx.shape} does not "
                    f"match landmark rows {pts.shape[0]}")
            if len(idx) and (np.any(np.diff(idx) <= 0) or idx[0] < 0):
                raise ValidationError(
                    f"{self.video_id}: frame_indices must be non-negative and "
                    f"strictly increasing")
        pts.setflags(write=False)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n_points(self) -> int:
        return self.points.shape[1]

    def covers_video(self, frame_count: int) -> bool:
        """True when the track has exactly one row per frame 0..frame_count-1."""
        if self.frame_indices is None:
            return len(self) == frame_count
        return len(self) == frame_count and bool(
            np.array_equal(self.frame_indices, np.arange(frame_count)))


@dataclass(frozen=True)
class AlignmentTemplate:
    """Registration target: three reference points inside a fixed output size."""

    points: np.ndarray
    width: int = 128
    height: int = 128

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)
        if pts.shape != (3, 2):
            raise ValidationError(f"template needs exactly 3 (x, y) points, got {pts.shape}")
        if self.width < 1 or self.height < 1:
            raise ValidationError("template size must be positive")
        pts.setflags(write=False)


# Two eye centers and the nose base, chosen for a 128x128 face crop.
DEFAULT_TEMPLATE = AlignmentTemplate(
    points=np.array([[42.0, 51.0], [86.0, 51.0], [64.0, 100.0]]),
    width=128,
    height=128,
)
