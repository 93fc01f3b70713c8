"""Block tiling, per-region Gaussian estimation and the log-density ratio field."""

from dataclasses import dataclass
from functools import lru_cache
from math import isqrt

import numpy as np
from scipy.linalg import solve_triangular

SENTINEL = -1

SHRINKAGE_LADDER = (1e-4, 1e-3, 1e-2, 1e-1, 0.5)
DEGENERATE_VARIANCE = 1e-6

_LOG_2PI = np.log(2.0 * np.pi)


class DegenerateRegionError(ValueError):
    """A region owns too few blocks to estimate its statistics."""


@dataclass
class BlockPartition:
    block_edge: int
    grid_height: int
    grid_width: int
    block_index_map: np.ndarray
    num_blocks: int

    @property
    def blocks_per_row(self):
        return self.grid_width // self.block_edge

    @property
    def blocks_per_col(self):
        return self.grid_height // self.block_edge

    @property
    def covered_shape(self):
        n = self.block_edge
        return self.blocks_per_col * n, self.blocks_per_row * n


@dataclass
class RegionStats:
    mean: np.ndarray
    covariance: np.ndarray
    chol_lower: np.ndarray
    log_det: float
    shrinkage_used: float
    sample_count: int

    @property
    def dim(self):
        return self.mean.shape[0]

    @classmethod
    def from_moments(cls, mean, covariance):
        """Wrap a known mean and SPD covariance (no shrinkage applied)."""
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(covariance, dtype=np.float64))
        L = np.linalg.cholesky(cov)
        return cls(mean, cov, L, 2.0 * float(np.sum(np.log(np.diag(L)))), 0.0, 0)


@dataclass
class RatioField:
    per_block_log_ratio: np.ndarray
    per_pixel_field: np.ndarray
    # per-pixel log-density of each region, already divided by the block area
    region0_field: np.ndarray
    region1_field: np.ndarray


def partition_blocks(height, width, block_edge):
    """Tile the grid with ``block_edge``-sized squares, row-major block ids.

    Pixels in the right/bottom remainder strips get :data:`SENTINEL`.
    """
    if block_edge < 2:
        raise ValueError(f"block_edge must be >= 2, got {block_edge}")
    if height < block_edge or width < block_edge:
        raise ValueError(f"block_edge {block_edge} larger than grid {height}x{width}")
    n = block_edge
    nr, nc = height // n, width // n
    index = np.full((height, width), SENTINEL, dtype=np.int64)
    ids = np.arange(nr * nc).reshape(nr, nc)
    index[: nr * n, : nc * n] = np.kron(ids, np.ones((n, n), dtype=np.int64))
    return BlockPartition(n, height, width, index, nr * nc)


def block_vectors(pixels, partition):
    """Return an ``(N, n*n)`` array; row i is the column-stacked block i."""
    n = partition.block_edge
    nr, nc = partition.blocks_per_col, partition.blocks_per_row
    covered = np.asarray(pixels)[: nr * n, : nc * n]
    # axes after reshape: (block row, pixel row, block col, pixel col)
    # -> (block row, block col, pixel col, pixel row) so rows vary fastest
    tiles = covered.reshape(nr, n, nc, n).transpose(0, 2, 3, 1)
    return tiles.reshape(nr * nc, n * n)


def block_field(per_block, partition, fill=0.0):
    """Broadcast one value per block to a per-pixel grid."""
    n = partition.block_edge
    nr, nc = partition.blocks_per_col, partition.blocks_per_row
    out = np.full((partition.grid_height, partition.grid_width), fill, dtype=np.float64)
    out[: nr * n, : nc * n] = np.repeat(
        np.repeat(np.asarray(per_block, dtype=np.float64).reshape(nr, nc), n, axis=0),
        n,
        axis=1,
    )
    return out


def classify_blocks(partition, phi):
    """Label each block 0 if strictly more than half its pixels have phi > 0, else 1."""
    phi = np.asarray(phi)
    if phi.shape != (partition.grid_height, partition.grid_width):
        raise ValueError("phi does not match partition grid")
    positive = block_vectors(phi > 0, partition).sum(axis=1)
    n2 = partition.block_edge**2
    return np.where(2 * positive > n2, 0, 1).astype(np.int8)


def _factor(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return None


@lru_cache(maxsize=8)
def _lag_index(n):
    # position p of a column-stacked n x n block sits at row p % n, col p // n
    p = np.arange(n * n)
    r, c = p % n, p // n
    dr = r[None, :] - r[:, None] + n - 1
    dc = c[None, :] - c[:, None] + n - 1
    return dr * (2 * n - 1) + dc


def stationary_projection(S, block_edge):
    """Average ``S`` over entries sharing a within-block pixel offset.

    Each offset class is summed and divided by the block area (the biased
    autocovariance estimate), which keeps the result positive semidefinite.
    """
    lag = _lag_index(block_edge)
    acf = np.bincount(lag.ravel(), weights=S.ravel(), minlength=(2 * block_edge - 1) ** 2)
    return acf[lag] / block_edge**2


def regularized_covariance(samples, ladder=SHRINKAGE_LADDER, stationary=True):
    """Mean, regularized covariance and its Cholesky factor from row samples.

    The biased sample covariance ``S`` is first projected onto covariances
    that depend only on the pixel offset (when ``stationary`` and the
    dimension is a square), then blended toward ``trace(S)/d * I`` with
    weights from ``ladder`` until the factorization succeeds.
    """
    samples = np.asarray(samples, dtype=np.float64)
    k, d = samples.shape
    mean = samples.mean(axis=0)
    centered = samples - mean
    S = centered.T @ centered / k
    S = 0.5 * (S + S.T)
    edge = isqrt(d)
    if stationary and edge * edge == d and edge > 1:
        S = stationary_projection(S, edge)
    target = np.trace(S) / d
    if not target > 0:
        cov = DEGENERATE_VARIANCE * np.eye(d)
        return mean, cov, np.linalg.cholesky(cov), 1.0
    eye = np.eye(d)
    for lam in ladder:
        cov = (1.0 - lam) * S + lam * target * eye
        L = _factor(cov)
        if L is not None and np.all(np.diag(L) > 0):
            return mean, cov, L, lam
    raise np.linalg.LinAlgError("covariance not positive definite at any shrinkage level")


def stats_from_samples(samples, ladder=SHRINKAGE_LADDER, stationary=True):
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ValueError("samples must be a 2D (count, dim) array")
    if samples.shape[0] < 2:
        raise DegenerateRegionError(f"need at least 2 blocks, got {samples.shape[0]}")
    if not np.all(np.isfinite(samples)):
        raise ValueError("non-finite block values")
    mean, cov, L, lam = regularized_covariance(samples, ladder, stationary)
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    return RegionStats(mean, cov, L, log_det, lam, samples.shape[0])


def estimate_region_stats(micrograph, partition, labels, region):
    """Gaussian parameters of the blocks carrying ``labels == region``.

    Raises
    ------
    DegenerateRegionError
        Fewer than two blocks belong to the region.
    """
    pixels = getattr(micrograph, "pixels", micrograph)
    vecs = block_vectors(pixels, partition)
    sel = np.asarray(labels) == region
    return stats_from_samples(vecs[sel])


def block_log_densities(stats, vectors):
    """Gaussian log-density of each row of ``vectors`` under ``stats``."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vectors.shape[1] != stats.dim:
        raise ValueError(f"block vector has length {vectors.shape[1]}, expected {stats.dim}")
    z = solve_triangular(stats.chol_lower, (vectors - stats.mean).T, lower=True, check_finite=False)
    maha = np.einsum("ij,ij->j", z, z)
    return -0.5 * maha - 0.5 * stats.log_det - 0.5 * stats.dim * _LOG_2PI


def block_log_density(stats, block_vector):
    x = np.asarray(block_vector, dtype=np.float64).reshape(-1)
    return float(block_log_densities(stats, x[None, :])[0])


def compute_ratio_field(micrograph, partition, stats0, stats1):
    """Per-block log-likelihood ratio spread over pixels, scaled by 1/n^2."""
    pixels = getattr(micrograph, "pixels", micrograph)
    vecs = block_vectors(pixels, partition)
    log0 = block_log_densities(stats0, vecs)
    log1 = block_log_densities(stats1, vecs)
    ratio = log0 - log1
    area = float(partition.block_edge**2)
    return RatioField(
        per_block_log_ratio=ratio,
        per_pixel_field=block_field(ratio / area, partition),
        region0_field=block_field(log0 / area, partition),
        region1_field=block_field(log1 / area, partition),
    )
