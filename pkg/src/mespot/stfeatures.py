"""Spatiotemporal block features and the supervised window spotter.

A feature vector describes a fixed-length volume of frames: the volume is
divided into overlapping blocks (x, y, t), and each block contributes one
histogram per orthogonal plane (XY, XT, YT):

* ``lbp-top``  — 59-bin uniform-LBP histograms per plane,
* ``hog-top``  — gradient-orientation histograms weighted by magnitude,
* ``higo-top`` — gradient-orientation histograms with unit weights.

Histograms are L1-normalized per block/plane and concatenated block-major,
plane-minor (blocks iterated t, then y, then x).  Pixels with zero gradient
carry no orientation and vote in no bin, so a constant volume yields
all-zero hog/higo features.

Classification is a max-margin linear model trained by deterministic
full-batch descent on the L2-regularized squared hinge loss with a
monotone backtracking step: the squared hinge is differentiable, so the
backtracking line search cannot stall at kinks, the recorded loss trace
never increases, and identical inputs give bitwise identical weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ParseError, TrainingError
from .model import Detection, FrameSequence
from .spotters import nms
from .texture import LBP_BINS, lbp_code_image
from . import io as mespot_io

MODEL_MAGIC = "MESPOT-LINEAR v1"
FEATURE_KINDS = ("lbp-top", "hog-top", "higo-top")


@dataclass(frozen=True)
class StFeatureConfig:
    """Feature extraction and window-scanning parameters.

    block_division is (x, y, t); overlap is the fraction of extent adjacent
    blocks share per axis.  scales multiply window_length to produce the
    scanning window lengths; every scanned window is resampled back to
    window_length frames before feature extraction.
    """

    kind: str = "higo-top"
    block_division: tuple[int, int, int] = (8, 8, 4)
    overlap: float = 0.2
    bins: int = 8
    window_length: int = 35
    scales: tuple[float, ...] = (1.0, 0.75, 0.5)

    def __post_init__(self) -> None:
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"kind must be one of {FEATURE_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "block_division", tuple(self.block_division))
        object.__setattr__(self, "scales", tuple(self.scales))
        if len(self.block_division) != 3 or min(self.block_division) < 1:
            raise ValueError(f"block_division must be 3 positive ints, "
                             f"got {self.block_division}")
        if not (0.0 <= self.overlap < 1.0):
            raise ValueError(f"overlap must be in [0, 1), got {self.overlap}")
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")
        if self.window_length < 2:
            raise ValueError(f"window_length must be >= 2, got {self.window_length}")
        if not self.scales or min(self.scales) <= 0 or max(self.scales) > 1.0:
            raise ValueError(f"scales must be in (0, 1], got {self.scales}")

    @property
    def bins_per_plane(self) -> int:
        return LBP_BINS if self.kind == "lbp-top" else self.bins

    @property
    def feature_length(self) -> int:
        bx, by, bt = self.block_division
        return bx * by * bt * 3 * self.bins_per_plane


def _axis_slices(extent: int, divisions: int, overlap: float) -> list[slice]:
    """Overlapping block extents along one axis (last block ends at extent)."""
    if extent < divisions:
        raise ValueError(f"extent {extent} smaller than {divisions} divisions")
    size = extent / ((divisions - 1) * (1.0 - overlap) + 1.0)
    step = size * (1.0 - overlap)
    slices = []
    for i in range(divisions):
        start = int(math.floor(i * step))
        stop = extent if i == divisions - 1 else min(extent, int(math.ceil(i * step + size)))
        slices.append(slice(start, max(stop, start + 1)))
    return slices


def _normalized(hist: np.ndarray) -> np.ndarray:
    total = hist.sum()
    return hist / total if total > 0 else hist


# Per-plane interior offsets: 1 along each axis the plane's 2-d slices span
# (neighbors/central differences need both sides), 0 along the batch axis.
_PLANE_OFFSETS = {"xy": (0, 1, 1), "xt": (1, 0, 1), "yt": (1, 1, 0)}


def _lbp_plane_layouts(volume: np.ndarray) -> list[tuple[np.ndarray, None, tuple[int, int, int]]]:
    """Uniform-LBP bin index per pixel and plane, precomputed for a whole volume.

    Each entry is (bins, None, (dt, dy, dx)) where bins[t-dt, y-dy, x-dx] is
    the histogram bin of pixel (t, y, x) in that plane.  Planes whose slice
    axes are shorter than 3 get an empty placeholder (never indexed: block
    interiors along those axes are empty too).
    """
    t, h, w = volume.shape
    empty = np.zeros((0, 0, 0), dtype=np.int64)
    xy = lbp_code_image(volume) if h >= 3 and w >= 3 else empty
    # XT slices: rows = t, cols = x, batched over y (then restored to t, y, x).
    xt = np.ascontiguousarray(np.moveaxis(lbp_code_image(np.moveaxis(volume, 1, 0)), 0, 1)) \
        if t >= 3 and w >= 3 else empty
    # YT slices: rows = t, cols = y, batched over x.
    yt = np.ascontiguousarray(np.transpose(lbp_code_image(np.moveaxis(volume, 2, 0)), (1, 2, 0))) \
        if t >= 3 and h >= 3 else empty
    return [(xy, None, _PLANE_OFFSETS["xy"]),
            (xt, None, _PLANE_OFFSETS["xt"]),
            (yt, None, _PLANE_OFFSETS["yt"])]


def _gradient_plane_layouts(volume: np.ndarray, bins: int, weighted: bool,
                            ) -> list[tuple[np.ndarray, np.ndarray | None, tuple[int, int, int]]]:
    """Orientation bin index (and magnitude weights) per pixel and plane.

    Central differences over the whole volume; pixels with zero gradient get
    the extra index ``bins`` so they vote in no histogram bin.  Layout and
    index convention match _lbp_plane_layouts.
    """
    dgx = 0.5 * (volume[:, :, 2:] - volume[:, :, :-2])
    dgy = 0.5 * (volume[:, 2:, :] - volume[:, :-2, :])
    dgt = 0.5 * (volume[2:, :, :] - volume[:-2, :, :])

    def layout(g_rows: np.ndarray, g_cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mag = np.hypot(g_cols, g_rows)
        angles = np.mod(np.arctan2(g_rows, g_cols), 2 * np.pi)
        index = np.minimum((angles / (2 * np.pi / bins)).astype(np.int64), bins - 1)
        return np.where(mag > 0, index, bins), mag

    # In-plane axes only: XY pairs (gy, gx), XT pairs (gt, gx), YT pairs (gt, gy),
    # each cropped to pixels interior along both slice axes.
    planes = {"xy": layout(dgy[:, :, 1:-1], dgx[:, 1:-1, :]),
              "xt": layout(dgt[:, :, 1:-1], dgx[1:-1, :, :]),
              "yt": layout(dgt[:, 1:-1, :], dgy[1:-1, :, :])}
    return [(index, mag if weighted else None, _PLANE_OFFSETS[name])
            for name, (index, mag) in planes.items()]


def extract_st_feature(volume: np.ndarray, cfg: StFeatureConfig = StFeatureConfig()) -> np.ndarray:
    """Feature vector for a (frames, height, width) volume."""
    volume = np.asarray(volume, dtype=np.float64)
    if volume.ndim != 3:
        raise ValueError(f"volume must be 3-d (t, h, w), got shape {volume.shape}")
    t, h, w = volume.shape
    bx, by, bt = cfg.block_division
    if t < bt:
        raise ValueError(f"volume length {t} smaller than temporal division {bt}")
    t_slices = _axis_slices(t, bt, cfg.overlap)
    y_slices = _axis_slices(h, by, cfg.overlap)
    x_slices = _axis_slices(w, bx, cfg.overlap)

    nbins = cfg.bins_per_plane
    if cfg.kind == "lbp-top":
        planes = _lbp_plane_layouts(volume)
    else:
        planes = _gradient_plane_layouts(volume, cfg.bins, weighted=cfg.kind == "hog-top")

    parts = []
    for ts in t_slices:
        for ys in y_slices:
            for xs in x_slices:
                for index, weights, (dt, dy, dx) in planes:
                    t0, t1 = ts.start, ts.stop - 2 * dt
                    y0, y1 = ys.start, ys.stop - 2 * dy
                    x0, x1 = xs.start, xs.stop - 2 * dx
                    if t1 <= t0 or y1 <= y0 or x1 <= x0:
                        parts.append(np.zeros(nbins))
                        continue
                    votes = index[t0:t1, y0:y1, x0:x1].ravel()
                    wts = None if weights is None else weights[t0:t1, y0:y1, x0:x1].ravel()
                    hist = np.bincount(votes, weights=wts, minlength=nbins + 1)
                    parts.append(_normalized(hist[:nbins].astype(np.float64)))
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# max-margin linear classifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrainConfig:
    """Classifier training hyperparameters."""

    l2_lambda: float = 1e-4
    epochs: int = 200
    seed: int = 0
    negatives_per_positive: int = 5

    def __post_init__(self) -> None:
        if self.l2_lambda < 0:
            raise ValueError(f"l2_lambda must be >= 0, got {self.l2_lambda}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.negatives_per_positive < 1:
            raise ValueError(f"negatives_per_positive must be >= 1")


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Trained linear scorer: score(x) = weights . x + bias."""

    kind: str
    dims: int
    bins: int
    window_length: int
    weights: np.ndarray
    bias: float
    loss_trace: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", weights)
        if weights.shape != (self.dims,):
            raise ValueError(f"weights shape {weights.shape} does not match dims {self.dims}")
        weights.setflags(write=False)

    def score(self, feature: np.ndarray) -> float:
        return float(self.weights @ np.asarray(feature, dtype=np.float64) + self.bias)


def _objective(weights: np.ndarray, bias: float, x: np.ndarray, y: np.ndarray,
               l2_lambda: float) -> float:
    """L2-regularized squared-hinge loss (differentiable, so descent steps exist
    at every non-optimal point and the backtracking search cannot stall)."""
    margins = y * (x @ weights + bias)
    gaps = np.maximum(0.0, 1.0 - margins)
    return float(0.5 * l2_lambda * weights @ weights + (gaps * gaps).mean())


def train_linear(features: np.ndarray, labels: Sequence[int],
                 st_cfg: StFeatureConfig = StFeatureConfig(),
                 train_cfg: TrainConfig = TrainConfig()) -> LinearModel:
    """Fit the max-margin linear model.

    Full-batch gradient descent on the squared hinge.  Each epoch starts
    from a Barzilai-Borwein step estimate (the objective is poorly
    conditioned at small l2_lambda, where plain fixed-step descent crawls)
    and halves it until the regularized objective does not increase, so the
    loss trace is non-increasing by construction and the fit is
    deterministic.  Labels are +-1 (0/False is taken as the negative class).
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise TrainingError(f"need a non-empty 2-d feature matrix, got shape {x.shape}")
    y = np.asarray([1 if lbl > 0 else -1 for lbl in labels], dtype=np.float64)
    if y.shape[0] != x.shape[0]:
        raise TrainingError(f"{x.shape[0]} samples but {y.shape[0]} labels")
    if len(set(y.tolist())) < 2:
        raise TrainingError("training needs both a positive and a negative sample")

    seen: dict[bytes, float] = {}
    for row, label in zip(x, y):
        key = row.tobytes()
        if seen.setdefault(key, label) != label:
            raise TrainingError(
                "contradictory training data: identical vectors with opposite labels")

    order = np.random.default_rng(train_cfg.seed).permutation(len(x))
    x = x[order]
    y = y[order]

    weights = np.zeros(x.shape[1])
    bias = 0.0
    step = 1.0
    previous: tuple[np.ndarray, float, np.ndarray, float] | None = None
    trace = [_objective(weights, bias, x, y, train_cfg.l2_lambda)]
    for _ in range(train_cfg.epochs):
        margins = y * (x @ weights + bias)
        gaps = np.maximum(0.0, 1.0 - margins)
        grad_w = train_cfg.l2_lambda * weights - 2.0 * (x * (gaps * y)[:, None]).sum(axis=0) / len(x)
        grad_b = -2.0 * (gaps * y).sum() / len(x)

        if previous is not None:
            dw = np.append(weights - previous[0], bias - previous[1])
            dg = np.append(grad_w - previous[2], grad_b - previous[3])
            denom = float(dw @ dg)
            step = float(dw @ dw) / denom if denom > 0 else step * 2.0
        previous = (weights, bias, grad_w, grad_b)

        step = min(max(step, 1e-12), 1e6)
        while step >= 1e-12:
            cand_w = weights - step * grad_w
            cand_b = bias - step * grad_b
            value = _objective(cand_w, cand_b, x, y, train_cfg.l2_lambda)
            if value <= trace[-1]:
                weights, bias = cand_w, cand_b
                trace.append(value)
                break
            step *= 0.5
        else:
            trace.append(trace[-1])  # already at (numerical) optimum

    return LinearModel(kind=st_cfg.kind, dims=x.shape[1], bins=st_cfg.bins_per_plane,
                       window_length=st_cfg.window_length, weights=weights, bias=bias,
                       loss_trace=tuple(trace))


def save_model(model: LinearModel, path: str | Path) -> None:
    lines = [
        MODEL_MAGIC,
        f"kind={model.kind}",
        f"dims={model.dims}",
        f"bins={model.bins}",
        f"window={model.window_length}",
    ]
    lines.extend(repr(float(value)) for value in model.weights)
    lines.append(repr(float(model.bias)))
    mespot_io.atomic_write_text(path, "\n".join(lines) + "\n")


def load_model(path: str | Path) -> LinearModel:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != MODEL_MAGIC:
        raise ParseError(f"{path}: expected magic line {MODEL_MAGIC!r}")
    header: dict[str, str] = {}
    for line in lines[1:5]:
        if "=" not in line:
            raise ParseError(f"{path}: malformed header line {line!r}")
        key, _, value = line.partition("=")
        header[key] = value
    try:
        kind = header["kind"]
        dims = int(header["dims"])
        bins = int(header["bins"])
        window = int(header["window"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad header: {exc}") from exc
    body = [line for line in lines[5:] if line.strip()]
    if len(body) != dims + 1:
        raise ParseError(f"{path}: expected {dims} weights plus bias, got {len(body)} values")
    try:
        values = np.asarray([float(v) for v in body], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return LinearModel(kind=kind, dims=dims, bins=bins, window_length=window,
                       weights=values[:-1], bias=float(values[-1]))


# ---------------------------------------------------------------------------
# multi-scale supervised spotting
# ---------------------------------------------------------------------------

def _resample_indices(source_length: int, target_length: int) -> np.ndarray:
    """Nearest-frame mapping of target positions onto [0, source_length)."""
    if target_length == 1:
        return np.zeros(1, dtype=np.int64)
    positions = np.arange(target_length) * (source_length - 1) / (target_length - 1)
    return np.floor(positions + 0.5).astype(np.int64)


def spot_supervised(seq: FrameSequence, model: LinearModel,
                    cfg: StFeatureConfig = StFeatureConfig()) -> list[Detection]:
    """Slide multi-scale windows, score with the model, keep positives, NMS.

    Window lengths are round(window_length * scale); the stride is a quarter
    window (rounded up).  Each window is resampled to window_length frames
    by nearest-frame index mapping before feature extraction.  Detections
    carry the original (unresampled) window center and length.
    """
    if model.kind != cfg.kind or model.dims != cfg.feature_length \
            or model.window_length != cfg.window_length:
        raise ConfigurationError(
            f"model (kind={model.kind}, dims={model.dims}, window={model.window_length}) "
            f"does not match feature config (kind={cfg.kind}, dims={cfg.feature_length}, "
            f"window={cfg.window_length})")
    n = len(seq)
    frames = seq.frames
    detections = []
    for scale in cfg.scales:
        length = int(math.floor(cfg.window_length * scale + 0.5))
        if length < cfg.block_division[2] or length > n:
            continue
        stride = math.ceil(length / 4)
        mapping = _resample_indices(length, cfg.window_length)
        for start in range(0, n - length + 1, stride):
            window = frames[start + mapping] if length != cfg.window_length \
                else frames[start:start + length]
            score = model.score(extract_st_feature(window, cfg))
            if score > 0:
                detections.append(Detection(video_id=seq.video_id,
                                            center=start + (length - 1) // 2,
                                            length=length, score=score))
    return nms(detections, cfg.window_length)
