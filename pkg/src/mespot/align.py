"""Face registration: warp every frame onto a fixed template using a
similarity transform estimated from three landmark points.

The transform (uniform scale + rotation + translation) is the least-squares
fit mapping the track's registration points onto the template's reference
points.  To keep long sequences cheap and temporally stable, the transform
is refreshed only every ``refresh_every`` frames (or at each landmarked
frame for sparse tracks) and reused for the frames in between.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import CoverageError, GeometryError
from .model import DEFAULT_TEMPLATE, AlignmentTemplate, FrameSequence, LandmarkTrack

DEFAULT_REFRESH = 30

# Landmark indices in the common 68-point annotation layout.
_RIGHT_EYE = slice(36, 42)
_LEFT_EYE = slice(42, 48)
_NOSE_BASE = 33


def _collinear(points: np.ndarray, tol: float = 1e-6) -> bool:
    a, b, c = np.asarray(points, dtype=np.float64)
    u, v = b - a, c - a
    return abs(float(u[0] * v[1] - u[1] * v[0])) <= tol


def estimate_similarity(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Least-squares similarity transform as a 3x3 homogeneous matrix.

    Maps (x, y, 1) source coordinates to destination coordinates.  Raises
    GeometryError when either point set is collinear (the fit would be
    rank-deficient).
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2 or len(src) < 3:
        raise ValueError("estimate_similarity needs matching (n, 2) arrays, n >= 3")
    if _collinear(src[:3]) or _collinear(dst[:3]):
        raise GeometryError("registration points are collinear")

    src_mean = src.mean(axis=0)
    dst_mean = dst.mean(axis=0)
    src_c = src - src_mean
    dst_c = dst - dst_mean
    var = float((src_c ** 2).sum())
    if var <= 0:
        raise GeometryError("registration points are coincident")

    # Closed-form similarity fit: rotation from the 2x2 covariance, then the
    # scale that minimizes the residual.
    cov = dst_c.T @ src_c
    u, s, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(u @ vt))
    diag = np.array([1.0, d])
    rot = u @ np.diag(diag) @ vt
    scale = float((s * diag).sum()) / var
    trans = dst_mean - scale * rot @ src_mean

    out = np.eye(3)
    out[:2, :2] = scale * rot
    out[:2, 2] = trans
    return out


def registration_points(track: LandmarkTrack, row: int) -> np.ndarray:
    """Extract the three registration points (eye centers, nose base) for a track row."""
    pts = track.points[row]
    if track.n_points == 3:
        return pts
    if track.n_points == 68:
        return np.stack([
            pts[_RIGHT_EYE].mean(axis=0),
            pts[_LEFT_EYE].mean(axis=0),
            pts[_NOSE_BASE],
        ])
    raise ValueError(
        f"{track.video_id}: track must carry 3 registration points or a 68-point "
        f"layout, got {track.n_points}")


def _governing_rows(track: LandmarkTrack, n_frames: int, refresh_every: int) -> np.ndarray:
    """Row of the track that governs each frame's transform."""
    if track.frame_indices is None:
        if len(track) < n_frames:
            raise CoverageError(
                f"{track.video_id}: dense track covers {len(track)} of {n_frames} frames")
        anchors = (np.arange(n_frames) // refresh_every) * refresh_every
        return anchors
    indices = track.frame_indices
    rows = np.searchsorted(indices, np.arange(n_frames), side="right") - 1
    if rows[0] < 0:
        raise CoverageError(f"{track.video_id}: no landmarks at or before frame 0")
    gaps = np.arange(n_frames) - indices[rows]
    if int(gaps.max()) >= refresh_every:
        bad = int(np.argmax(gaps >= refresh_every))
        raise CoverageError(
            f"{track.video_id}: frame {bad} is {int(gaps[bad])} frames past the last "
            f"landmarked frame (limit {refresh_every - 1})")
    return rows


def align_frames(seq: FrameSequence, track: LandmarkTrack,
                 template: AlignmentTemplate = DEFAULT_TEMPLATE,
                 refresh_every: int = DEFAULT_REFRESH) -> FrameSequence:
    """Warp a sequence onto the template's coordinate frame.

    Output frames are template-sized; pixels mapping outside the input are 0.
    """
    if refresh_every < 1:
        raise ValueError(f"refresh_every must be >= 1, got {refresh_every}")
    n = len(seq)
    rows = _governing_rows(track, n, refresh_every)

    transforms: dict[int, np.ndarray] = {}
    out = np.empty((n, template.height, template.width), dtype=np.uint8)
    for i in range(n):
        row = int(rows[i])
        inv = transforms.get(row)
        if inv is None:
            src = registration_points(track, row)
            fwd = estimate_similarity(src, template.points)
            inv = np.linalg.inv(fwd)
            transforms[row] = inv
        # scipy's affine_transform maps output to input coordinates in
        # (row, col) order; swap the x/y blocks of the inverse accordingly.
        matrix = inv[[1, 0]][:, [1, 0]]
        offset = inv[[1, 0], 2]
        warped = ndimage.affine_transform(
            seq.frames[i].astype(np.float64), matrix, offset=offset,
            output_shape=(template.height, template.width), order=1,
            mode="constant", cval=0.0)
        out[i] = np.clip(np.rint(warped), 0, 255).astype(np.uint8)

    return FrameSequence(video_id=seq.video_id, fps=seq.fps, frames=out)
