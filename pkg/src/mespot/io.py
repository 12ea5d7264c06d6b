"""File formats: dataset manifests, detection lists, frame storage and
landmark tracks.

All text formats are line-oriented UTF-8 with ``\\n`` endings, ``#`` comment
lines, and comma-separated fields (commas are therefore forbidden inside
ids and paths).  Writers produce a canonical form that round-trips through
the parsers byte-for-byte; writes go through a temp file and atomic rename
so readers never observe partial output.

Frame storage comes in two interchangeable layouts, selected by whether the
manifest's frames_path is a directory or a file:

* a directory of per-frame binary PGM files named ``frame_000000.pgm``,
  ``frame_000001.pgm``, ... (lossless 8-bit grayscale), or
* a single raw file: 16-byte header (magic ``MESQ``, then width, height and
  frame count as little-endian uint32) followed by the frames as row-major
  uint8, frame after frame.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .model import (
    DatasetManifest,
    Detection,
    FrameSequence,
    GroundTruthSample,
    LandmarkTrack,
    VideoRecord,
)

RAW_MAGIC = b"MESQ"
DETECTIONS_HEADER = "video_id,center,length,score"
LANDMARKS_HEADER = "video_id,frame,point_index,x,y"
DISTRACTORS_HEADER = "video_id,kind,onset,offset"


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _data_lines(path: Path) -> Iterable[tuple[int, str]]:
    """Yield (1-based line number, stripped line) skipping blanks and comments."""
    with open(path, "r", encoding="utf-8") as fh:
        for num, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield num, line


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def parse_manifest(path: str | Path) -> DatasetManifest:
    """Parse a dataset manifest.

    Layout: a ``[videos]`` section of ``video_id,subject_id,frame_count,
    fps,frames_path`` rows followed by a ``[ground_truth]`` section of
    ``video_id,onset,offset`` rows.  frames_path entries may be relative to
    the manifest's own directory.
    """
    path = Path(path)
    videos: list[VideoRecord] = []
    ground_truth: list[tuple[int, str, int, int]] = []
    section = None
    for num, line in _data_lines(path):
        if line.startswith("["):
            if line == "[videos]":
                section = "videos"
            elif line == "[ground_truth]":
                section = "ground_truth"
            else:
                raise ParseError(f"{path}: line {num}: unknown section {line!r}")
            continue
        if section is None:
            raise ParseError(f"{path}: line {num}: data before any section header")
        fields = line.split(",")
        if section == "videos":
            if len(fields) != 5:
                raise ParseError(
                    f"{path}: line {num}: expected 5 fields "
                    f"(video_id,subject_id,frame_count,fps,frames_path), got {len(fields)}")
            vid, subj, count_s, fps_s, frames_path = (f.strip() for f in fields)
            try:
                frame_count = int(count_s)
                fps = float(fps_s)
            except ValueError as exc:
                raise ParseError(f"{path}: line {num}: {exc}") from exc
            videos.append(VideoRecord(vid, subj, frame_count, fps, frames_path))
        else:
            if len(fields) != 3:
                raise ParseError(
                    f"{path}: line {num}: expected 3 fields (video_id,onset,offset), "
                    f"got {len(fields)}")
            vid, onset_s, offset_s = (f.strip() for f in fields)
            try:
                onset = int(onset_s)
                offset = int(offset_s)
            except ValueError as exc:
                raise ParseError(f"{path}: line {num}: {exc}") from exc
            ground_truth.append((num, vid, onset, offset))

    subject_of = {rec.video_id: rec.subject_id for rec in videos}
    samples = []
    for num, vid, onset, offset in ground_truth:
        if vid not in subject_of:
            raise ValidationError(
                f"{path}: line {num}: ground truth references unknown video_id {vid!r}")
        samples.append(GroundTruthSample(vid, subject_of[vid], onset, offset))

    return DatasetManifest(videos=tuple(videos), ground_truth=tuple(samples),
                           base_dir=str(path.parent))


def render_manifest(manifest: DatasetManifest) -> str:
    lines = ["[videos]"]
    for rec in manifest.videos:
        lines.append(f"{rec.video_id},{rec.subject_id},{rec.frame_count},"
                     f"{rec.fps!r},{rec.frames_path}")
    lines.append("[ground_truth]")
    for gt in manifest.ground_truth:
        lines.append(f"{gt.video_id},{gt.onset},{gt.offset}")
    return "\n".join(lines) + "\n"


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    atomic_write_text(path, render_manifest(manifest))


# ---------------------------------------------------------------------------
# detections
# ---------------------------------------------------------------------------

def parse_detections(path: str | Path,
                     manifest: DatasetManifest | None = None) -> list[Detection]:
    """Parse a detections CSV; a file with no data rows yields an empty list.

    When a manifest is supplied, every detection must reference a known
    video and carry a center inside that video's frame range.
    """
    path = Path(path)
    detections: list[Detection] = []
    frame_counts = ({rec.video_id: rec.frame_count for rec in manifest.videos}
                    if manifest is not None else None)
    saw_header = False
    for num, line in _data_lines(path):
        if not saw_header:
            if line != DETECTIONS_HEADER:
                raise ParseError(
                    f"{path}: line {num}: expected header {DETECTIONS_HEADER!r}, "
                    f"got {line!r}")
            saw_header = True
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise ParseError(f"{path}: line {num}: expected 4 fields, got {len(fields)}")
        vid, center_s, length_s, score_s = (f.strip() for f in fields)
        try:
            center = int(center_s)
            length = int(length_s)
            score = float(score_s)
        except ValueError as exc:
            raise ParseError(f"{path}: line {num}: {exc}") from exc
        try:
            det = Detection(vid, center, length, score)
        except ValidationError as exc:
            raise ParseError(f"{path}: line {num}: {exc}") from exc
        if frame_counts is not None:
            if vid not in frame_counts:
                raise ValidationError(
                    f"{path}: line {num}: detection references unknown video_id {vid!r}")
            if not (0 <= center < frame_counts[vid]):
                raise ValidationError(
                    f"{path}: line {num}: center {center} outside video "
                    f"{vid!r} frame range [0, {frame_counts[vid]})")
        detections.append(det)
    return detections


def render_detections(detections: Sequence[Detection]) -> str:
    lines = [DETECTIONS_HEADER]
    for det in detections:
        lines.append(f"{det.video_id},{det.center},{det.length},{det.score!r}")
    return "\n".join(lines) + "\n"


def write_detections(detections: Sequence[Detection], path: str | Path) -> None:
    atomic_write_text(path, render_detections(detections))


def group_by_video(detections: Iterable[Detection]) -> dict[str, list[Detection]]:
    grouped: dict[str, list[Detection]] = {}
    for det in detections:
        grouped.setdefault(det.video_id, []).append(det)
    return grouped


# ---------------------------------------------------------------------------
# frame storage
# ---------------------------------------------------------------------------

def write_pgm(path: str | Path, image: np.ndarray) -> None:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise ValueError(f"PGM frames must be 2-d, got shape {image.shape}")
    h, w = image.shape
    atomic_write_bytes(path, b"P5\n%d %d\n255\n" % (w, h) + image.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5" or parts[3] != b"255":
        raise ParseError(f"{path}: not an 8-bit binary PGM")
    w, h = int(parts[1]), int(parts[2])
    pixels = parts[4][: w * h]
    if len(pixels) != w * h:
        raise ParseError(f"{path}: truncated PGM payload")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w)


def write_frames_raw(frames: np.ndarray, path: str | Path) -> None:
    frames = np.ascontiguousarray(frames, dtype=np.uint8)
    if frames.ndim != 3:
        raise ValueError(f"frames must be 3-d (t, h, w), got shape {frames.shape}")
    n, h, w = frames.shape
    header = RAW_MAGIC + struct.pack("<III", w, h, n)
    atomic_write_bytes(path, header + frames.tobytes())


def read_frames_raw(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != RAW_MAGIC:
            raise ParseError(f"{path}: missing {RAW_MAGIC.decode()} header")
        w, h, n = struct.unpack("<III", header[4:])
        payload = fh.read(w * h * n)
    if len(payload) != w * h * n:
        raise ParseError(f"{path}: truncated frame payload "
                         f"(expected {w * h * n} bytes, got {len(payload)})")
    return np.frombuffer(payload, dtype=np.uint8).reshape(n, h, w)


def write_frames_dir(frames: np.ndarray, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        write_pgm(directory / f"frame_{i:06d}.pgm", frame)


def resolve_frames_path(record: VideoRecord, base_dir: str | None) -> Path:
    path = Path(record.frames_path)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return path


def load_frames(record: VideoRecord, base_dir: str | None = None) -> FrameSequence:
    """Load a video's frames from either storage layout, checking the frame count."""
    path = resolve_frames_path(record, base_dir)
    if path.is_dir():
        names = sorted(p for p in path.iterdir() if p.name.startswith("frame_"))
        if not names:
            raise FileNotFoundError(
                f"video {record.video_id!r}: no frame_* files in {path}")
        frames = np.stack([read_pgm(p) for p in names])
    elif path.is_file():
        frames = read_frames_raw(path)
    else:
        raise FileNotFoundError(
            f"video {record.video_id!r}: frame storage not found at {path}")
    if len(frames) != record.frame_count:
        raise ValidationError(
            f"video {record.video_id!r}: storage holds {len(frames)} frames but "
            f"manifest declares {record.frame_count}")
    return FrameSequence(video_id=record.video_id, fps=record.fps, frames=frames)


# ---------------------------------------------------------------------------
# landmarks
# ---------------------------------------------------------------------------

def render_landmarks(tracks: Sequence[LandmarkTrack]) -> str:
    lines = [LANDMARKS_HEADER]
    for track in tracks:
        indices = (track.frame_indices if track.frame_indices is not None
                   else np.arange(len(track)))
        for row, frame in enumerate(indices):
            for p in range(track.n_points):
                x, y = track.points[row, p]
                lines.append(f"{track.video_id},{int(frame)},{p},{float(x)!r},{float(y)!r}")
    return "\n".join(lines) + "\n"


def write_landmarks(tracks: Sequence[LandmarkTrack], path: str | Path) -> None:
    atomic_write_text(path, render_landmarks(tracks))


def parse_landmarks(path: str | Path) -> dict[str, LandmarkTrack]:
    """Parse a landmarks CSV into one track per video.

    Every frame present must carry the same set of point indices
    0..P-1; tracks covering frames 0..N-1 contiguously come back dense.
    """
    path = Path(path)
    coords: dict[str, dict[int, dict[int, tuple[float, float]]]] = {}
    saw_header = False
    for num, line in _data_lines(path):
        if not saw_header:
            if line != LANDMARKS_HEADER:
                raise ParseError(
                    f"{path}: line {num}: expected header {LANDMARKS_HEADER!r}, got {line!r}")
            saw_header = True
            continue
        fields = line.split(",")
        if len(fields) != 5:
            raise ParseError(f"{path}: line {num}: expected 5 fields, got {len(fields)}")
        vid, frame_s, point_s, x_s, y_s = (f.strip() for f in fields)
        try:
            frame = int(frame_s)
            point = int(point_s)
            x = float(x_s)
            y = float(y_s)
        except ValueError as exc:
            raise ParseError(f"{path}: line {num}: {exc}") from exc
        coords.setdefault(vid, {}).setdefault(frame, {})[point] = (x, y)

    tracks: dict[str, LandmarkTrack] = {}
    for vid, per_frame in coords.items():
        frames = sorted(per_frame)
        n_points = len(per_frame[frames[0]])
        pts = np.empty((len(frames), n_points, 2), dtype=np.float64)
        for row, frame in enumerate(frames):
            entries = per_frame[frame]
            if sorted(entries) != list(range(n_points)):
                raise ValidationError(
                    f"{path}: video {vid!r} frame {frame}: point indices must be "
                    f"0..{n_points - 1}")
            for p in range(n_points):
                pts[row, p] = entries[p]
        indices = np.asarray(frames, dtype=np.int64)
        dense = bool(np.array_equal(indices, np.arange(len(frames))))
        tracks[vid] = LandmarkTrack(video_id=vid, points=pts,
                                    frame_indices=None if dense else indices)
    return tracks


# ---------------------------------------------------------------------------
# distractor sidecar log
# ---------------------------------------------------------------------------

def render_distractors(events: Sequence[tuple[str, str, int, int]]) -> str:
    lines = [DISTRACTORS_HEADER]
    for vid, kind, onset, offset in events:
        lines.append(f"{vid},{kind},{onset},{offset}")
    return "\n".join(lines) + "\n"


def write_distractors(events: Sequence[tuple[str, str, int, int]],
                      path: str | Path) -> None:
    atomic_write_text(path, render_distractors(events))


def parse_distractors(path: str | Path) -> list[tuple[str, str, int, int]]:
    events = []
    saw_header = False
    for num, line in _data_lines(Path(path)):
        if not saw_header:
            if line != DISTRACTORS_HEADER:
                raise ParseError(f"{path}: line {num}: expected header "
                                 f"{DISTRACTORS_HEADER!r}, got {line!r}")
            saw_header = True
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise ParseError(f"{path}: line {num}: expected 4 fields, got {len(fields)}")
        vid, kind, onset_s, offset_s = (f.strip() for f in fields)
        try:
            events.append((vid, kind, int(onset_s), int(offset_s)))
        except ValueError as exc:
            raise ParseError(f"{path}: line {num}: {exc}") from exc
    return events
