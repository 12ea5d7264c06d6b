"""Deterministic synthetic fixtures: face-like videos with injected
micro-expression transients, ground-truth annotations, landmark tracks and
(optionally) confounding distractor events.

Every video is a static textured face; events add localized intensity
transients and matching landmark deformations:

* micro-expression — a Gaussian blob over the brow or mouth with a linear
  onset -> apex -> offset ramp, length drawn from the configured range;
  annotated as ground truth.
* blink — a short (8-14 frame) high-amplitude transient over both eyes.
* head_shift — a global translation ramp of up to +-2 px and back.
* macro_expression — a long (80-150 frame) low-frequency ramp over the
  mouth region.

Distractors are logged to a sidecar CSV, never to the ground truth.
Randomness comes from numpy's PCG64 generator; every video derives its
streams from SeedSequence([seed, video_index]), and micro-expressions use a
stream independent of the distractor stream, so enabling distractors never
moves the ground truth.  Injected intervals (including distractors) never
overlap and keep a gap of at least 70 frames, and no event starts within 60
frames of either end of the video.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as mespot_io
from .errors import ConfigurationError
from .model import DatasetManifest, GroundTruthSample, LandmarkTrack, VideoRecord

MIN_GAP = 70      # frames between any two injected intervals (2x detection window)
EDGE_MARGIN = 60  # frames kept event-free at both ends of every video

ME_REGIONS = ("right_brow", "left_brow", "mouth")


@dataclass(frozen=True)
class FixtureConfig:
    """Parameters of a generated dataset."""

    seed: int = 7
    videos: int = 4
    subjects: int = 2
    frames_per_video: int = 2200
    fps: float = 100.0
    frame_size: tuple[int, int] = (128, 128)
    mes_per_video: tuple[int, int] = (1, 3)
    me_length: tuple[int, int] = (10, 51)
    blink_rate: float = 0.0
    head_shift_rate: float = 0.0
    macro_rate: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "frame_size", tuple(self.frame_size))
        object.__setattr__(self, "mes_per_video", tuple(self.mes_per_video))
        object.__setattr__(self, "me_length", tuple(self.me_length))
        if self.videos < 1:
            raise ValueError(f"videos must be >= 1, got {self.videos}")
        if not (1 <= self.subjects <= self.videos):
            raise ValueError(f"subjects must be in [1, videos], got {self.subjects}")
        if self.frames_per_video < 8:
            raise ValueError(f"frames_per_video must be >= 8, got {self.frames_per_video}")
        if not (self.fps > 0):
            raise ValueError(f"fps must be positive, got {self.fps}")
        w, h = self.frame_size
        if w < 32 or h < 32:
            raise ValueError(f"frame_size must be at least 32x32, got {w}x{h}")
        lo, hi = self.mes_per_video
        if not (0 <= lo <= hi):
            raise ValueError(f"mes_per_video range invalid: {self.mes_per_video}")
        lo, hi = self.me_length
        if not (2 <= lo <= hi <= self.frames_per_video // 4):
            raise ValueError(
                f"me_length range must lie within [2, frames_per_video // 4 = "
                f"{self.frames_per_video // 4}], got {self.me_length}")
        for name in ("blink_rate", "head_shift_rate", "macro_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


# ---------------------------------------------------------------------------
# static face: raster and 68-point landmark layout (128x128 reference coords)
# ---------------------------------------------------------------------------

def _ellipse_mask(h: int, w: int, cx: float, cy: float, rx: float, ry: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0


def _base_face(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    sx, sy = w / 128.0, h / 128.0
    base = np.full((h, w), 90.0)
    base += np.linspace(0.0, 25.0, h)[:, None]
    base[_ellipse_mask(h, w, 64 * sx, 66 * sy, 52 * sx, 60 * sy)] += 45.0
    for ex in (42.0, 86.0):  # eyes
        base[_ellipse_mask(h, w, ex * sx, 51 * sy, 10 * sx, 5 * sy)] -= 55.0
    for bx in (42.0, 86.0):  # eyebrows
        base[_ellipse_mask(h, w, bx * sx, 40 * sy, 13 * sx, 3 * sy)] -= 35.0
    base[_ellipse_mask(h, w, 64 * sx, 80 * sy, 5 * sx, 14 * sy)] -= 15.0   # nose
    base[_ellipse_mask(h, w, 64 * sx, 108 * sy, 14 * sx, 6 * sy)] -= 45.0  # mouth
    base += rng.integers(-16, 17, size=(h, w))
    return np.clip(base, 8.0, 235.0)


def _arc(n: int, cx: float, cy: float, rx: float, ry: float,
         start: float, stop: float) -> np.ndarray:
    theta = np.linspace(start, stop, n)
    return np.stack([cx + rx * np.cos(theta), cy + ry * np.sin(theta)], axis=1)


def _base_landmarks(h: int, w: int) -> np.ndarray:
    """A plausible static 68-point layout, in pixels, scaled from 128x128."""
    pts = np.zeros((68, 2))
    pts[0:17] = _arc(17, 64, 58, 46, 56, np.pi, 2 * np.pi)[::-1]        # jaw (chin down)
    pts[17:22] = np.stack([np.linspace(30, 54, 5),
                           np.array([42, 39.5, 38.5, 39.5, 42])], axis=1)  # right brow
    pts[22:27] = np.stack([np.linspace(74, 98, 5),
                           np.array([42, 39.5, 38.5, 39.5, 42])], axis=1)  # left brow
    pts[27:31] = np.stack([np.full(4, 64.0), np.linspace(55, 85, 4)], axis=1)  # bridge
    pts[31:36] = np.stack([np.linspace(56, 72, 5),
                           np.array([97, 99, 100, 99, 97])], axis=1)     # nose base (33 center)
    pts[36:42] = np.array([[35, 51], [39, 48.5], [45, 48.5],
                           [49, 51], [45, 53.5], [39, 53.5]])            # right eye
    pts[42:48] = np.array([[79, 51], [83, 48.5], [89, 48.5],
                           [93, 51], [89, 53.5], [83, 53.5]])            # left eye
    pts[48:60] = _arc(12, 64, 108, 14, 6, np.pi, 3 * np.pi)[:12]         # outer lips
    pts[60:68] = _arc(8, 64, 108, 9, 3, np.pi, 3 * np.pi)[:8]            # inner lips
    pts *= np.array([w / 128.0, h / 128.0])
    return pts


def _blob(h: int, w: int, cx: float, cy: float, sigma: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma ** 2)))


def _triangular_ramp(length: int) -> np.ndarray:
    """Linear rise to 1 at the interval's canonical center frame, then back."""
    apex = (length - 1) // 2
    ramp = np.empty(length)
    ramp[:apex + 1] = np.linspace(0.0, 1.0, apex + 1) if apex > 0 else 1.0
    if length - apex > 1:
        ramp[apex:] = np.linspace(1.0, 0.0, length - apex)
    return ramp


def _place_interval(rng: np.random.Generator, length: int, n_frames: int,
                    taken: list[tuple[int, int]]) -> tuple[int, int] | None:
    lo = EDGE_MARGIN
    hi = n_frames - EDGE_MARGIN - length
    if hi < lo:
        return None
    for _ in range(2000):
        onset = int(rng.integers(lo, hi + 1))
        offset = onset + length - 1
        if all(onset > off + MIN_GAP or on > offset + MIN_GAP for on, off in taken):
            taken.append((onset, offset))
            return onset, offset
    return None


# region anchors in 128x128 reference coordinates, plus the landmark indices
# that deform with each region.
_REGIONS = {
    "right_brow": ((42.0, 42.0), np.arange(17, 22)),
    "left_brow": ((86.0, 42.0), np.arange(22, 27)),
    "mouth": ((64.0, 108.0), np.arange(48, 68)),
}


def generate_video(cfg: FixtureConfig, video_index: int):
    """Render one video; returns (frames, gt intervals, landmarks, events).

    frames is (n, h, w) uint8; gt intervals are (onset, offset) pairs sorted
    by onset; landmarks is (n, 68, 2); events are (kind, onset, offset)
    tuples for the distractor log.
    """
    w, h = cfg.frame_size
    n = cfg.frames_per_video
    sx, sy = w / 128.0, h / 128.0
    ss = np.random.SeedSequence([cfg.seed, video_index])
    texture_rng, me_rng, distractor_rng = (np.random.default_rng(s) for s in ss.spawn(3))

    base = _base_face(h, w, texture_rng)
    landmarks = np.tile(_base_landmarks(h, w), (n, 1, 1))
    taken: list[tuple[int, int]] = []

    # --- micro-expressions (independent of the distractor stream) ---
    gts: list[tuple[int, int]] = []
    me_events = []
    count = int(me_rng.integers(cfg.mes_per_video[0], cfg.mes_per_video[1] + 1))
    for _ in range(count):
        length = int(me_rng.integers(cfg.me_length[0], cfg.me_length[1] + 1))
        region = ME_REGIONS[int(me_rng.integers(0, len(ME_REGIONS)))]
        amplitude = float(me_rng.uniform(65.0, 85.0))
        sigma = float(me_rng.uniform(5.0, 7.5)) * (sx + sy) / 2.0
        jitter = me_rng.uniform(-4.0, 4.0, size=2)
        placed = _place_interval(me_rng, length, n, taken)
        if placed is None:
            raise ConfigurationError(
                f"video {video_index}: cannot place {count} micro-expressions of "
                f"length <= {cfg.me_length[1]} in {n} frames")
        gts.append(placed)
        me_events.append((region, placed, amplitude, sigma, jitter))

    # --- distractors ---
    events: list[tuple[str, int, int]] = []
    schedule = (
        ("blink", cfg.blink_rate, (8, 14)),
        ("head_shift", cfg.head_shift_rate, (20, 40)),
        ("macro_expression", cfg.macro_rate, (80, 150)),
    )
    for kind, rate, (lo, hi) in schedule:
        for _ in range(int(distractor_rng.poisson(rate))):
            length = int(distractor_rng.integers(lo, hi + 1))
            placed = _place_interval(distractor_rng, length, n, taken)
            if placed is not None:  # crowded videos may drop distractors
                events.append((kind, placed[0], placed[1]))

    # --- render: head shifts move the crop window over a padded canvas ---
    pad = 4
    canvas = np.pad(base, pad, mode="edge")
    offsets = np.zeros((n, 2), dtype=np.int64)  # (dx, dy) content shift per frame
    for kind, onset, offset in events:
        if kind != "head_shift":
            continue
        ramp = _triangular_ramp(offset - onset + 1)
        dx = float(distractor_rng.choice([-2.0, 2.0]))
        dy = float(distractor_rng.choice([-1.0, 1.0]))
        offsets[onset:offset + 1, 0] = np.rint(dx * ramp)
        offsets[onset:offset + 1, 1] = np.rint(dy * ramp)

    frames = np.empty((n, h, w), dtype=np.float32)
    for t in range(n):
        ox, oy = int(offsets[t, 0]), int(offsets[t, 1])
        frames[t] = canvas[pad - oy:pad - oy + h, pad - ox:pad - ox + w]
    landmarks += offsets[:, None, :]

    # --- micro-expression transients ---
    for region, (onset, offset), amplitude, sigma, jitter in me_events:
        (ax, ay), lm_idx = _REGIONS[region]
        cx, cy = ax * sx + jitter[0] * sx, ay * sy + jitter[1] * sy
        ramp = _triangular_ramp(offset - onset + 1)
        frames[onset:offset + 1] += amplitude * ramp[:, None, None] * _blob(h, w, cx, cy, sigma)
        if region == "mouth":
            landmarks[onset:offset + 1, [48, 54], 0] += \
                np.outer(ramp, [-2.5 * sx, 2.5 * sx])
            landmarks[onset:offset + 1, [51, 57], 1] += \
                np.outer(ramp, [-1.5 * sy, 1.5 * sy])
        else:
            landmarks[onset:offset + 1, lm_idx, 1] -= 3.0 * sy * ramp[:, None]

    # --- blink and macro-expression transients ---
    for kind, onset, offset in events:
        ramp = _triangular_ramp(offset - onset + 1)
        if kind == "blink":
            for ex in (42.0, 86.0):
                frames[onset:offset + 1] += \
                    75.0 * ramp[:, None, None] * _blob(h, w, ex * sx, 51 * sy, 5.5 * (sx + sy) / 2)
            landmarks[onset:offset + 1, [37, 38, 43, 44], 1] += 2.5 * sy * ramp[:, None]
            landmarks[onset:offset + 1, [40, 41, 46, 47], 1] -= 1.0 * sy * ramp[:, None]
        elif kind == "macro_expression":
            frames[onset:offset + 1] += \
                50.0 * ramp[:, None, None] * _blob(h, w, 64 * sx, 104 * sy, 18.0 * (sx + sy) / 2)
            landmarks[onset:offset + 1, [48, 54], 0] += np.outer(ramp, [-4.0 * sx, 4.0 * sx])

    gts.sort()
    events.sort(key=lambda e: e[1])
    return (np.clip(frames, 0, 255).astype(np.uint8), gts, landmarks, events)


def generate_fixture(cfg: FixtureConfig, out_dir: str | Path):
    """Generate the dataset on disk.

    Writes manifest.txt, frames/<video>.mesq, landmarks.csv and
    distractors.csv under out_dir; returns (manifest, landmark tracks by
    video id, distractor events as (video_id, kind, onset, offset) tuples).
    """
    out_dir = Path(out_dir)
    (out_dir / "frames").mkdir(parents=True, exist_ok=True)

    records = []
    samples = []
    tracks: dict[str, LandmarkTrack] = {}
    all_events: list[tuple[str, str, int, int]] = []
    for index in range(cfg.videos):
        video_id = f"v{index:03d}"
        subject_id = f"s{index % cfg.subjects:02d}"
        frames, gts, landmarks, events = generate_video(cfg, index)
        rel_path = f"frames/{video_id}.mesq"
        mespot_io.write_frames_raw(frames, out_dir / rel_path)
        records.append(VideoRecord(video_id=video_id, subject_id=subject_id,
                                   frame_count=len(frames), fps=cfg.fps,
                                   frames_path=rel_path))
        samples.extend(GroundTruthSample(video_id, subject_id, on, off)
                       for on, off in gts)
        tracks[video_id] = LandmarkTrack(video_id=video_id, points=landmarks)
        all_events.extend((video_id, kind, on, off) for kind, on, off in events)

    manifest = DatasetManifest(videos=tuple(records), ground_truth=tuple(samples),
                               base_dir=str(out_dir))
    mespot_io.write_manifest(manifest, out_dir / "manifest.txt")
    mespot_io.write_landmarks([tracks[rec.video_id] for rec in records],
                              out_dir / "landmarks.csv")
    mespot_io.write_distractors(all_events, out_dir / "distractors.csv")
    return manifest, tracks, all_events
