"""Local binary pattern primitives and block-histogram helpers shared by the
appearance-based spotters and the spatiotemporal feature extractor.

The LBP variant is the classic 8-neighbor, radius-1 code with the uniform
(u2) mapping: the 58 patterns with at most two circular 0/1 transitions get
their own histogram bin in ascending numeric order, and every other pattern
shares the final bin, giving 59 bins.  Bit k of a code compares the
neighbor at offset ``NEIGHBOR_OFFSETS[k]`` against the center pixel
(neighbor >= center sets the bit).
"""

from __future__ import annotations

import numpy as np

LBP_NEIGHBORS = 8
LBP_RADIUS = 1
LBP_BINS = 59

# (dy, dx) for bits 0..7: counter-clockwise from the right-hand neighbor,
# with y pointing down.
NEIGHBOR_OFFSETS = (
    (0, 1), (1, 1), (1, 0), (1, -1),
    (0, -1), (-1, -1), (-1, 0), (-1, 1),
)


def _transitions(pattern: int) -> int:
    bits = [(pattern >> k) & 1 for k in range(LBP_NEIGHBORS)]
    return sum(bits[k] != bits[(k + 1) % LBP_NEIGHBORS] for k in range(LBP_NEIGHBORS))


def _build_uniform_lut() -> np.ndarray:
    lut = np.full(256, LBP_BINS - 1, dtype=np.uint8)
    uniform = [p for p in range(256) if _transitions(p) <= 2]
    for bin_index, pattern in enumerate(uniform):
        lut[pattern] = bin_index
    return lut


UNIFORM_LUT = _build_uniform_lut()


def lbp_code_image(images: np.ndarray) -> np.ndarray:
    """Uniform-LBP bin indices for every interior pixel.

    ``images`` is (..., h, w); the result is (..., h-2, w-2) uint8 bin
    indices in [0, 59).  Leading axes are batched, so a stack of frames or
    plane slices is coded in one call.
    """
    images = np.asarray(images)
    h, w = images.shape[-2], images.shape[-1]
    if h < 3 or w < 3:
        raise ValueError(f"LBP needs at least 3x3 images, got {h}x{w}")
    center = images[..., 1:h - 1, 1:w - 1]
    codes = np.zeros(center.shape, dtype=np.uint8)
    for k, (dy, dx) in enumerate(NEIGHBOR_OFFSETS):
        neighbor = images[..., 1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        codes |= (neighbor >= center).astype(np.uint8) << k
    return UNIFORM_LUT[codes]


def block_index_map(height: int, width: int, grid: int) -> np.ndarray:
    """Per-pixel block ids for a grid x grid division of the frame.

    Rows and columns that do not divide evenly are assigned to the last
    block along their axis.
    """
    if grid < 1:
        raise ValueError(f"grid must be >= 1, got {grid}")
    if height < grid or width < grid:
        raise ValueError(f"frame {height}x{width} smaller than {grid}x{grid} grid")
    rows = np.minimum(np.arange(height) // (height // grid), grid - 1)
    cols = np.minimum(np.arange(width) // (width // grid), grid - 1)
    return (rows[:, None] * grid + cols[None, :]).astype(np.int64)


def lbp_block_histograms(frame: np.ndarray, grid: int = 6) -> np.ndarray:
    """L1-normalized uniform-LBP histograms per block: a (grid*grid, 59) array.

    Border pixels carry no code and are skipped; a block with no coded
    pixels keeps an all-zero histogram.
    """
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise ValueError(f"frame must be 2-d, got shape {frame.shape}")
    codes = lbp_code_image(frame)
    blocks = block_index_map(frame.shape[0], frame.shape[1], grid)[1:-1, 1:-1]
    flat = blocks.ravel() * LBP_BINS + codes.ravel().astype(np.int64)
    hist = np.bincount(flat, minlength=grid * grid * LBP_BINS).astype(np.float64)
    hist = hist.reshape(grid * grid, LBP_BINS)
    totals = hist.sum(axis=1, keepdims=True)
    np.divide(hist, totals, out=hist, where=totals > 0)
    return hist


def chi_square(a: np.ndarray, b: np.ndarray) -> float:
    """Chi-square histogram distance sum((a-b)^2 / (a+b)), with 0/0 -> 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    num = (a - b) ** 2
    den = a + b
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(terms.sum())
