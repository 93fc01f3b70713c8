"""Micrograph and mask containers plus disk I/O and resampling."""

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .mrc import read_mrc, write_mrc

logger = logging.getLogger(__name__)

MIN_USEFUL_SIZE = 600


@dataclass
class Micrograph:
    pixels: np.ndarray
    pixel_size_angstrom: float | None = None
    source_path: str = ""

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise ValueError(f"micrograph must be 2D, got shape {self.pixels.shape}")
        if self.height < 2 or self.width < 2:
            raise ValueError(f"micrograph too small: {self.pixels.shape}")
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("micrograph contains NaN or Inf values")

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape


@dataclass
class SegmentationMask:
    """Binary mask, 1 marks contamination."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2D, got shape {arr.shape}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("mask values must be 0 or 1")
        self.pixels = arr.astype(np.uint8)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape

    @property
    def fraction(self):
        return float(self.pixels.mean()) if self.pixels.size else 0.0


def _detect_format(path):
    suffix = Path(path).suffix.lower()
    if suffix in (".mrc", ".mrcs", ".map"):
        return "mrc"
    if suffix == ".png":
        return "png"
    if suffix in (".tif", ".tiff"):
        return "tiff"
    raise ValueError(f"cannot infer image format from suffix {suffix!r}")


def _read_raster(path):
    with Image.open(path) as img:
        if img.mode in ("RGB", "RGBA", "P", "LA", "CMYK"):
            img = img.convert("L")
        return np.array(img)


def read_micrograph(path, format="auto"):
    """Load a micrograph from an MRC, PNG or TIFF file.

    Parameters
    ----------
    path : str or Path
        Input file.
    format : {"auto", "mrc", "png", "tiff"}
        ``auto`` picks the reader from the file suffix.

    Returns
    -------
    Micrograph
        Pixels as float64 with shape ``(rows, cols)``; the MRC pixel size is
        captured when the header carries one.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    fmt = _detect_format(path) if format == "auto" else format
    pixel_size = None
    if fmt == "mrc":
        data, pixel_size = read_mrc(path)
    elif fmt in ("png", "tiff"):
        try:
            data = _read_raster(path)
        except OSError as exc:
            raise ValueError(f"unreadable image {path}: {exc}") from exc
        if data.ndim == 3:
            data = data[..., 0]
    else:
        raise ValueError(f"unknown format {format!r}")
    return Micrograph(data.astype(np.float64), pixel_size, str(path))


def center_crop_square(arr):
    h, w = arr.shape
    s = min(h, w)
    r0 = (h - s) // 2
    c0 = (w - s) // 2
    return arr[r0 : r0 + s, c0 : c0 + s]


def _area_weights(n_in, n_out):
    # Row k spreads over input interval [k*f, (k+1)*f), weights are overlap/f.
    f = n_in / n_out
    edges = np.arange(n_out + 1) * f
    lo = np.arange(n_in)
    start = np.maximum(edges[:-1, None], lo[None, :])
    stop = np.minimum(edges[1:, None], lo[None, :] + 1)
    return np.clip(stop - start, 0.0, None) / f


def downsample(m, target):
    """Center-crop to a square and block-average down to ``target x target``.

    Bins whose edges fall between input pixels take area-weighted
    contributions from the straddled pixels.
    """
    if target < 2:
        raise ValueError(f"target size must be >= 2, got {target}")
    h, w = m.shape
    if h <= target and w <= target:
        warnings.warn(
            f"micrograph {h}x{w} is not larger than target {target}; "
            "returned unchanged",
            stacklevel=2,
        )
        return m
    square = center_crop_square(m.pixels)
    s = square.shape[0]
    if s <= target:
        warnings.warn(
            f"shorter edge {s} is not larger than target {target}; only cropped",
            stacklevel=2,
        )
        return Micrograph(square.copy(), m.pixel_size_angstrom, m.source_path)
    wts = _area_weights(s, target)
    out = wts @ square @ wts.T
    psize = None if m.pixel_size_angstrom is None else m.pixel_size_angstrom * s / target
    return Micrograph(out, psize, m.source_path)


def normalize(m):
    """Zero-mean, unit-sd copy; a constant image maps to zeros."""
    px = m.pixels
    if px.min() == px.max():
        return Micrograph(np.zeros_like(px), m.pixel_size_angstrom, m.source_path)
    mean = px.mean()
    centered = px - mean
    sd = np.sqrt(np.mean(centered**2))
    if sd == 0 or not np.isfinite(sd):
        return Micrograph(np.zeros_like(px), m.pixel_size_angstrom, m.source_path)
    out = centered / sd
    # second pass removes the residual roundoff of the first
    out -= out.mean()
    sd2 = np.sqrt(np.mean(out**2))
    if sd2 > 0:
        out /= sd2
    return Micrograph(out, m.pixel_size_angstrom, m.source_path)


def upsample_nearest(mask, shape):
    """Nearest-neighbour resize of a 2D array to ``shape``."""
    mask = np.asarray(mask)
    h, w = mask.shape
    H, W = shape
    rows = np.minimum(((np.arange(H) + 0.5) * h / H).astype(int), h - 1)
    cols = np.minimum(((np.arange(W) + 0.5) * w / W).astype(int), w - 1)
    return mask[np.ix_(rows, cols)]


def restore_geometry(mask, original_shape):
    """Map a working-resolution mask back onto the original frame.

    Square masks destined for a non-square frame are scaled onto the centered
    square that :func:`downsample` cropped; the cropped margins get 0.
    """
    mask = np.asarray(mask)
    H, W = original_shape
    h, w = mask.shape
    if h * W == w * H:
        return upsample_nearest(mask, (H, W))
    s = min(H, W)
    out = np.zeros((H, W), dtype=mask.dtype)
    r0 = (H - s) // 2
    c0 = (W - s) // 2
    out[r0 : r0 + s, c0 : c0 + s] = upsample_nearest(mask, (s, s))
    return out


def write_mask(mask, path, format="png", upsample_to=None):
    """Write a mask as 8-bit PNG (0/255) or MRC mode 0 (0/1)."""
    px = mask.pixels if isinstance(mask, SegmentationMask) else SegmentationMask(mask).pixels
    if upsample_to is not None:
        px = restore_geometry(px, tuple(upsample_to))
    path = Path(path)
    if format == "png":
        Image.fromarray((px * 255).astype(np.uint8)).save(path)
    elif format == "mrc":
        write_mrc(path, px.astype(np.int8), mode=0)
    else:
        raise ValueError(f"unknown mask format {format!r}")


def write_overlay(m, mask, path):
    """Save a grayscale rendering of ``m`` with contamination tinted red."""
    px = m.pixels
    lo, hi = np.percentile(px, [1, 99])
    gray = np.clip((px - lo) / (hi - lo if hi > lo else 1.0), 0, 1)
    rgb = np.repeat((gray * 255).astype(np.uint8)[..., None], 3, axis=2)
    sel = np.asarray(mask.pixels if isinstance(mask, SegmentationMask) else mask) == 1
    rgb[sel, 0] = 255
    rgb[sel, 1] //= 2
    rgb[sel, 2] //= 2
    Image.fromarray(rgb).save(path)


def check_working_size(size):
    if size < MIN_USEFUL_SIZE:
        logger.warning(
            "working grid %d px is below %d px; covariance estimates will rest "
            "on few blocks and segmentation quality may degrade",
            size,
            MIN_USEFUL_SIZE,
        )
