"""Alternating estimation / evolution loop producing a contamination mask."""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .blocks import (
    DegenerateRegionError,
    block_vectors,
    classify_blocks,
    compute_ratio_field,
    partition_blocks,
    stats_from_samples,
)
from .levelset import SolverParams, init_phi, run_evolution
from .micrograph import SegmentationMask, check_working_size, downsample, normalize

logger = logging.getLogger(__name__)

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
MAX_DEGENERATE_ROUNDS = 3


@dataclass
class PipelineConfig:
    particle_size_px: float
    working_size: int = 800
    block_edge: int = 25
    solver: SolverParams = field(default_factory=SolverParams)
    area_factor: float = 4.0

    def __post_init__(self):
        if self.particle_size_px < 1:
            raise ValueError("particle_size_px must be >= 1")
        if self.block_edge < 2:
            raise ValueError("block_edge must be >= 2")
        if self.working_size < 2 * self.block_edge:
            raise ValueError("working_size must be at least twice block_edge")
        if not self.area_factor > 0:
            raise ValueError("area_factor must be positive")


@dataclass
class SegmentationState:
    phi: np.ndarray
    stats0: object = None
    stats1: object = None
    outer_iter: int = 0
    converged: bool = False


@dataclass
class SegmentationResult:
    mask: SegmentationMask
    status: str
    outer_iters: int
    converged: bool
    phi: np.ndarray
    original_shape: tuple
    particle_size_working_px: float

    @property
    def contamination_fraction(self):
        return self.mask.fraction


def select_contamination_side(phi):
    """0 if {phi > 0} is the smaller side, 1 if {phi < 0} is; ties go to 0."""
    phi = np.asarray(phi)
    pos = np.count_nonzero(phi > 0)
    neg = np.count_nonzero(phi < 0)
    if pos == neg:
        warnings.warn("both sides of the level set have equal area", stacklevel=2)
        return 0
    return 0 if pos < neg else 1


def filter_by_particle_size(mask, particle_size_working_px, area_factor=4.0):
    """Erase 4-connected components smaller than ``area_factor`` particle disks."""
    px = np.asarray(getattr(mask, "pixels", mask)).astype(bool)
    threshold = area_factor * (np.pi / 4.0) * particle_size_working_px**2
    labels, count = ndimage.label(px, structure=FOUR_CONNECTED)
    if count:
        sizes = np.bincount(labels.ravel())
        keep = sizes >= threshold
        keep[0] = False
        px = keep[labels]
    return SegmentationMask(px.astype(np.uint8))


def prepare(micrograph, working_size):
    """Downsample to the working grid (when larger) and normalize.

    Returns the normalized working micrograph and the original-to-working
    length ratio used to rescale the particle size.
    """
    h, w = micrograph.shape
    if min(h, w) > working_size:
        work = downsample(micrograph, working_size)
        scale = working_size / min(h, w)
    else:
        work = micrograph
        scale = 1.0
    check_working_size(min(work.shape))
    return normalize(work), scale


def _region_stats(vecs, labels, region, global_stats):
    try:
        return stats_from_samples(vecs[labels == region]), False
    except DegenerateRegionError:
        return global_stats, True


def run_segmentation(micrograph, cfg):
    """Full segmentation with diagnostics; see :func:`segment_micrograph`."""
    work, scale = prepare(micrograph, cfg.working_size)
    ps_work = max(cfg.particle_size_px * scale, 1.0)
    h, w = work.shape
    partition = partition_blocks(h, w, cfg.block_edge)
    vecs = block_vectors(work.pixels, partition)
    global_stats = stats_from_samples(vecs)
    solver = cfg.solver

    state = SegmentationState(phi=init_phi(h, w))
    prev_inside = state.phi > 0
    degenerate_rounds = 0

    while state.outer_iter < solver.max_outer_iters:
        state.outer_iter += 1
        labels = classify_blocks(partition, state.phi)
        state.stats0, deg0 = _region_stats(vecs, labels, 0, global_stats)
        state.stats1, deg1 = _region_stats(vecs, labels, 1, global_stats)
        if deg0 or deg1:
            degenerate_rounds += 1
            logger.debug("outer %d: degenerate region, using global stats", state.outer_iter)
            if degenerate_rounds >= MAX_DEGENERATE_ROUNDS:
                empty = SegmentationMask(np.zeros((h, w), dtype=np.uint8))
                return SegmentationResult(
                    empty, "no_contamination", state.outer_iter, True,
                    state.phi, micrograph.shape, ps_work,
                )
        else:
            degenerate_rounds = 0

        ratio = compute_ratio_field(work, partition, state.stats0, state.stats1)
        state.phi, _ = run_evolution(state.phi, ratio, solver)

        inside = state.phi > 0
        changed = np.count_nonzero(inside != prev_inside) / inside.size
        prev_inside = inside
        logger.debug("outer %d: %.5f of pixels changed side", state.outer_iter, changed)
        if changed < solver.sign_change_tol:
            state.converged = True
            break

    side = select_contamination_side(state.phi)
    raw = state.phi > 0 if side == 0 else state.phi < 0
    mask = filter_by_particle_size(raw, ps_work, cfg.area_factor)
    status = "converged" if state.converged else "max_iters"
    if not mask.pixels.any():
        status = "no_contamination"
    return SegmentationResult(
        mask, status, state.outer_iter, state.converged, state.phi, micrograph.shape, ps_work
    )


def segment_micrograph(micrograph, cfg):
    """Contamination mask (1 = contaminated) at working resolution.

    The mask lives on the working grid; use
    :func:`asocem.micrograph.write_mask` with ``upsample_to`` to map it back
    to the original frame.
    """
    return run_segmentation(micrograph, cfg).mask
