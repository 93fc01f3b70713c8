import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from asocem.evaluation import compute_metrics
from asocem.micrograph import Micrograph
from asocem.pipeline import (
    PipelineConfig,
    filter_by_particle_size,
    prepare,
    run_segmentation,
    segment_micrograph,
    select_contamination_side,
)
from asocem.synthetic import Disk, RegionModel, SyntheticSpec, generate


@pytest.fixture(scope="module")
def small_disk():
    return generate(SyntheticSpec(200, 200, Disk((0.5, 0.5), 0.2), seed=1))


def _small_cfg(**kw):
    return PipelineConfig(particle_size_px=5, working_size=200, block_edge=10, **kw)


# -- side selection --------------------------------------------------------------


def test_side_selection():
    phi = -np.ones((10, 10))
    phi[0, :] = 1
    assert select_contamination_side(phi) == 0
    assert select_contamination_side(-phi) == 1


def test_side_selection_tie_warns():
    phi = np.ones((4, 4))
    phi[:2] = -1
    with pytest.warns(UserWarning):
        assert select_contamination_side(phi) == 0


# -- area filter -----------------------------------------------------------------


def test_filter_examples():
    mask = np.zeros((100, 100), np.uint8)
    mask[:40, :25] = 1  # area 1000
    mask[60:70, 60:70] = 1  # area 100
    out = filter_by_particle_size(mask, 10, 4.0).pixels
    assert out[:40, :25].all()
    assert not out[60:70, 60:70].any()
    assert out.sum() == 1000


def test_filter_uses_four_connectivity():
    mask = np.zeros((10, 10), np.uint8)
    mask[0:3, 0:3] = 1
    mask[3:6, 3:6] = 1  # touches the first square only diagonally
    out = filter_by_particle_size(mask, 1.0, 10 / (np.pi / 4) / 1.0).pixels  # threshold 10 px
    assert out.sum() == 0


def test_filter_empty():
    out = filter_by_particle_size(np.zeros((5, 5)), 3, 4.0)
    assert not out.pixels.any()


masks = arrays(np.uint8, st.tuples(st.integers(1, 30), st.integers(1, 30)), elements=st.integers(0, 1))


@settings(max_examples=100, deadline=None)
@given(masks, st.floats(1, 6), st.floats(0.1, 5))
def test_filter_idempotent_and_monotone(mask, size, factor):
    once = filter_by_particle_size(mask, size, factor).pixels
    twice = filter_by_particle_size(once, size, factor).pixels
    np.testing.assert_array_equal(once, twice)
    assert np.all(once <= mask)


# -- configuration and preparation ----------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(particle_size_px=0.5)
    with pytest.raises(ValueError):
        PipelineConfig(particle_size_px=10, block_edge=1)
    with pytest.raises(ValueError):
        PipelineConfig(particle_size_px=10, working_size=40, block_edge=25)
    with pytest.raises(ValueError):
        PipelineConfig(particle_size_px=10, area_factor=0)


def test_prepare_downsamples_and_rescales():
    m = Micrograph(np.random.default_rng(0).standard_normal((400, 600)))
    work, scale = prepare(m, 200)
    assert work.shape == (200, 200)
    assert scale == 0.5
    assert abs(work.pixels.mean()) < 1e-12 and work.pixels.std() == pytest.approx(1.0)


def test_prepare_keeps_small_input():
    m = Micrograph(np.random.default_rng(0).standard_normal((100, 120)))
    work, scale = prepare(m, 200)
    assert work.shape == (100, 120) and scale == 1.0


# -- end to end on small grids ---------------------------------------------------


def test_small_disk_segmentation(small_disk):
    m, gt = small_disk
    result = run_segmentation(m, _small_cfg())
    assert result.status == "converged"
    met = compute_metrics(result.mask, gt)
    assert met.sensitivity >= 0.9 and met.specificity >= 0.9
    assert result.contamination_fraction <= 0.5


def test_deterministic(small_disk):
    m, _ = small_disk
    a = segment_micrograph(m, _small_cfg()).pixels
    b = segment_micrograph(m, _small_cfg()).pixels
    assert a.tobytes() == b.tobytes()


def test_affine_invariance(small_disk):
    m, _ = small_disk
    a = segment_micrograph(m, _small_cfg()).pixels
    b = segment_micrograph(Micrograph(3.0 * m.pixels + 7.0), _small_cfg()).pixels
    np.testing.assert_array_equal(a, b)


def test_degenerate_partition_reports_no_contamination():
    m, _ = generate(SyntheticSpec(50, 50, Disk(radius=0.0), RegionModel(), seed=0))
    result = run_segmentation(m, PipelineConfig(particle_size_px=5, working_size=50, block_edge=25))
    assert result.status == "no_contamination"
    assert not result.mask.pixels.any()


def test_constant_micrograph():
    result = run_segmentation(Micrograph(np.ones((60, 60))), PipelineConfig(5, working_size=60, block_edge=10))
    assert result.status == "no_contamination"
    assert not result.mask.pixels.any()


def test_working_resolution_mask_and_particle_rescale(small_disk):
    m, _ = small_disk
    big = Micrograph(np.kron(m.pixels, np.ones((2, 2))))
    result = run_segmentation(big, PipelineConfig(particle_size_px=10, working_size=200, block_edge=10))
    assert result.mask.pixels.shape == (200, 200)
    assert result.particle_size_working_px == 5.0
    assert result.original_shape == (400, 400)
