"""Two-region stationary Gaussian micrographs with known ground truth."""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .micrograph import Micrograph, SegmentationMask


@dataclass
class RegionModel:
    mean: float = 0.0
    sd: float = 1.0
    window: int = 1  # moving-average edge; 1 means white noise

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("sd must be positive")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 1")


@dataclass
class Disk:
    center: tuple = (0.5, 0.5)
    radius: float = 0.2

    def contains(self, x, y):
        cx, cy = self.center
        return (x - cx) ** 2 + (y - cy) ** 2 < self.radius**2


@dataclass
class HalfPlane:
    """The strip ``x < fraction`` (left side of the image)."""

    fraction: float = 0.3

    def contains(self, x, y):
        return np.broadcast_to(x < self.fraction, np.broadcast(x, y).shape)


@dataclass
class DiskUnion:
    disks: list = field(default_factory=list)

    def contains(self, x, y):
        out = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for d in self.disks:
            out |= d.contains(x, y)
        return out


@dataclass
class SyntheticSpec:
    height: int = 800
    width: int = 800
    geometry: object = field(default_factory=Disk)
    region0: RegionModel = field(default_factory=lambda: RegionModel(0.0, 2.0))
    region1: RegionModel = field(default_factory=RegionModel)
    seed: int = 0


def rasterize(geometry, height, width):
    """Pixel-center containment mask of ``geometry`` on the unit square."""
    y = (np.arange(height) + 0.5) / height
    x = (np.arange(width) + 0.5) / width
    return np.asarray(geometry.contains(x[None, :], y[:, None]), dtype=bool)


def stationary_field(rng, height, width, model):
    """White noise smoothed by a ``window x window`` box, rescaled to ``model.sd``.

    The box sum of ``w*w`` unit-variance samples divided by ``w`` has unit
    variance, so no empirical rescaling is needed. Padding by the window
    before filtering keeps every output pixel a full-window average.
    """
    w = model.window
    if w == 1:
        base = rng.standard_normal((height, width))
    else:
        r = w // 2
        white = rng.standard_normal((height + 2 * r, width + 2 * r))
        smooth = ndimage.uniform_filter(white, size=w, mode="constant")
        base = smooth[r : r + height, r : r + width] * w
    return model.mean + model.sd * base


def generate(spec):
    """Return ``(micrograph, ground_truth_mask)`` for ``spec``.

    Region 0 fills the geometry interior (mask value 1), region 1 the rest.
    Each region gets its own full-frame field so the two are independent.
    """
    rng = np.random.default_rng(spec.seed)
    truth = rasterize(spec.geometry, spec.height, spec.width)
    f0 = stationary_field(rng, spec.height, spec.width, spec.region0)
    f1 = stationary_field(rng, spec.height, spec.width, spec.region1)
    pixels = np.where(truth, f0, f1)
    return Micrograph(pixels, source_path=f"synthetic(seed={spec.seed})"), SegmentationMask(truth)


def _geometry_from_dict(d):
    kind = d.get("type", "disk")
    if kind == "disk":
        return Disk(tuple(d.get("center", (0.5, 0.5))), float(d.get("radius", 0.2)))
    if kind == "halfplane":
        return HalfPlane(float(d.get("fraction", 0.3)))
    if kind == "disks":
        return DiskUnion([_geometry_from_dict({**x, "type": "disk"}) for x in d["disks"]])
    raise ValueError(f"unknown geometry type {kind!r}")


def spec_from_dict(d):
    """Build a :class:`SyntheticSpec` from its JSON form.

    Example::

        {"height": 800, "width": 800, "seed": 3,
         "geometry": {"type": "disk", "center": [0.5, 0.5], "radius": 0.2},
         "region0": {"mean": 0, "sd": 2, "window": 1},
         "region1": {"mean": 0, "sd": 1, "window": 5}}
    """
    return SyntheticSpec(
        height=int(d.get("height", 800)),
        width=int(d.get("width", 800)),
        geometry=_geometry_from_dict(d.get("geometry", {})),
        region0=RegionModel(**d.get("region0", {"sd": 2.0})),
        region1=RegionModel(**d.get("region1", {})),
        seed=int(d.get("seed", 0)),
    )
