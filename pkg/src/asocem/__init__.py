"""Automatic segmentation of contaminated regions in cryo-EM micrographs."""

from .blocks import (
    BlockPartition,
    DegenerateRegionError,
    RatioField,
    RegionStats,
    block_log_density,
    classify_blocks,
    compute_ratio_field,
    estimate_region_stats,
    partition_blocks,
)
from .evaluation import MetricsReport, batch_evaluate, compute_metrics
from .levelset import (
    SolverParams,
    curvature_div,
    delta_reg,
    energy,
    energy_gradient,
    evolve_step,
    heaviside_reg,
    init_phi,
    run_evolution,
)
from .micrograph import (
    Micrograph,
    SegmentationMask,
    downsample,
    normalize,
    read_micrograph,
    write_mask,
)
from .pipeline import (
    PipelineConfig,
    SegmentationResult,
    filter_by_particle_size,
    run_segmentation,
    segment_micrograph,
    select_contamination_side,
)
from .synthetic import Disk, DiskUnion, HalfPlane, RegionModel, SyntheticSpec, generate

__version__ = "0.1.0"
