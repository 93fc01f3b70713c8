import warnings

import mrcfile
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from asocem.micrograph import (
    Micrograph,
    SegmentationMask,
    downsample,
    normalize,
    read_micrograph,
    restore_geometry,
    upsample_nearest,
    write_mask,
)
from asocem.mrc import MRCError, read_mrc, write_mrc


def _write_reference_mrc(path, data, voxel_size=None):
    with mrcfile.new(str(path), overwrite=True) as f:
        f.set_data(data)
        if voxel_size is not None:
            f.voxel_size = voxel_size


def test_read_mrc_mode2_layout(tmp_path):
    data = np.arange(16, dtype=np.float32).reshape(4, 4)
    path = tmp_path / "a.mrc"
    _write_reference_mrc(path, data)
    m = read_micrograph(path)
    assert m.shape == (4, 4)
    np.testing.assert_array_equal(m.pixels.ravel(), np.arange(16.0))


@pytest.mark.parametrize("dtype", [np.int8, np.int16, np.float32, np.uint16])
def test_reference_writer_roundtrip_bitwise(tmp_path, dtype):
    rng = np.random.default_rng(1)
    if np.issubdtype(dtype, np.integer):
        info = np.iinfo(dtype)
        data = rng.integers(info.min, info.max, size=(37, 53), endpoint=True).astype(dtype)
    else:
        data = rng.standard_normal((37, 53)).astype(dtype)
    path = tmp_path / "ref.mrc"
    _write_reference_mrc(path, data, voxel_size=1.34)
    out, psize = read_mrc(path)
    assert out.dtype == data.dtype
    assert out.tobytes() == data.tobytes()
    assert psize == pytest.approx(1.34, rel=1e-6)


def test_own_writer_is_readable_by_reference(tmp_path):
    data = np.random.default_rng(2).standard_normal((20, 30)).astype(np.float32)
    path = tmp_path / "own.mrc"
    write_mrc(path, data, mode=2, pixel_size=2.5)
    with mrcfile.open(str(path), permissive=False) as f:
        assert f.data.tobytes() == data.tobytes()
        assert float(f.voxel_size.x) == pytest.approx(2.5)


def test_big_endian_reference_file(tmp_path):
    data = np.arange(12, dtype=np.int16).reshape(3, 4)
    path = tmp_path / "be.mrc"
    with mrcfile.new(str(path)) as f:
        f.set_data(data.astype(">i2"))
    out, _ = read_mrc(path)
    np.testing.assert_array_equal(out, data)


def test_unsupported_mode(tmp_path):
    path = tmp_path / "bad.mrc"
    write_mrc(path, np.zeros((4, 4), np.float32), mode=2)
    raw = bytearray(path.read_bytes())
    raw[12:16] = (4).to_bytes(4, "little")  # complex mode
    path.write_bytes(bytes(raw))
    with pytest.raises(MRCError, match="mode"):
        read_mrc(path)


def test_stack_takes_first_section(tmp_path, caplog):
    data = np.stack([np.full((5, 6), k, np.float32) for k in range(3)])
    path = tmp_path / "stack.mrc"
    with mrcfile.new(str(path)) as f:
        f.set_data(data)
    with caplog.at_level("WARNING"):
        m = read_micrograph(path)
    assert np.all(m.pixels == 0)
    assert "first" in caplog.text


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        read_micrograph("/nonexistent/x.mrc")


def test_png_constant(tmp_path):
    path = tmp_path / "c.png"
    Image.fromarray(np.full((9, 7), 128, np.uint8)).save(path)
    m = read_micrograph(path)
    assert m.shape == (9, 7)
    assert np.all(m.pixels == 128.0)


def test_png16_and_tiff(tmp_path):
    data = (np.arange(30, dtype=np.uint16) * 2000).reshape(5, 6)
    Image.fromarray(data).save(tmp_path / "a.png")
    Image.fromarray(data).save(tmp_path / "a.tif")
    for name in ("a.png", "a.tif"):
        np.testing.assert_array_equal(read_micrograph(tmp_path / name).pixels, data)


def test_micrograph_rejects_nonfinite():
    with pytest.raises(ValueError):
        Micrograph(np.array([[1.0, np.nan], [0.0, 0.0]]))


# -- downsample ----------------------------------------------------------------


def test_downsample_constant():
    out = downsample(Micrograph(np.full((4, 4), 7.0)), 2)
    np.testing.assert_array_equal(out.pixels, np.full((2, 2), 7.0))


def test_downsample_exact_block_means():
    a = np.array([[0, 0, 2, 2], [0, 0, 2, 2], [4, 4, 6, 6], [4, 4, 6, 6]], float)
    np.testing.assert_array_equal(downsample(Micrograph(a), 2).pixels, [[0, 2], [4, 6]])


def test_downsample_white_noise_variance():
    x = np.random.default_rng(0).standard_normal((1000, 1000))
    out = downsample(Micrograph(x), 500).pixels
    assert out.shape == (500, 500)
    assert out.var() == pytest.approx(x.var() / 4, rel=0.10)


def test_downsample_fractional_bins_preserve_constant():
    out = downsample(Micrograph(np.full((10, 10), 3.5)), 3)
    np.testing.assert_allclose(out.pixels, 3.5, rtol=0, atol=1e-12)


def test_downsample_fractional_bins_area_weighted():
    # 3 -> 2: each output takes 1.5 input pixels
    a = np.array([[0.0, 3.0, 6.0]] * 3)
    out = downsample(Micrograph(a), 2).pixels
    np.testing.assert_allclose(out, [[1.0, 5.0], [1.0, 5.0]])


def test_downsample_center_crops_non_square():
    a = np.zeros((4, 8))
    a[:, 2:6] = np.array([[0, 0, 2, 2], [0, 0, 2, 2], [4, 4, 6, 6], [4, 4, 6, 6]])
    a[:, :2] = 99
    a[:, 6:] = 99
    np.testing.assert_array_equal(downsample(Micrograph(a), 2).pixels, [[0, 2], [4, 6]])


def test_downsample_small_input_unchanged():
    m = Micrograph(np.ones((3, 3)))
    with pytest.warns(UserWarning):
        assert downsample(m, 5) is m


def test_downsample_rejects_tiny_target():
    with pytest.raises(ValueError):
        downsample(Micrograph(np.ones((4, 4))), 1)


@pytest.mark.parametrize("sizes", [(24, 12, 6), (36, 12, 4), (60, 20, 10)])
def test_downsample_composition_aligned_blocks(sizes):
    big, mid, final = sizes
    coarse = np.random.default_rng(3).standard_normal((final, final))
    img = np.kron(coarse, np.ones((big // final, big // final)))
    twice = downsample(downsample(Micrograph(img), mid), final).pixels
    once = downsample(Micrograph(img), final).pixels
    np.testing.assert_allclose(twice, once, rtol=0, atol=1e-12)
    np.testing.assert_allclose(once, coarse, rtol=0, atol=1e-12)


# -- normalize -----------------------------------------------------------------


def test_normalize_example():
    out = normalize(Micrograph(np.array([[1.0, 3.0], [1.0, 3.0]])))
    np.testing.assert_allclose(out.pixels, [[-1, 1], [-1, 1]])


def test_normalize_constant():
    out = normalize(Micrograph(np.full((3, 3), 5.0)))
    assert np.all(out.pixels == 0)


finite_images = arrays(
    np.float64,
    st.tuples(st.integers(2, 12), st.integers(2, 12)),
    elements=st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
)


@settings(max_examples=100, deadline=None)
@given(finite_images)
def test_normalize_moments_and_idempotence(img):
    out = normalize(Micrograph(img)).pixels
    if np.ptp(img) == 0:
        assert np.all(out == 0)
        return
    if out.std() == 0:  # spread below float resolution after centering
        return
    assert abs(out.mean()) < 1e-9
    assert abs(out.std() - 1) < 1e-9
    again = normalize(Micrograph(out)).pixels
    np.testing.assert_allclose(again, out, rtol=0, atol=1e-9)


# -- masks ---------------------------------------------------------------------


def test_mask_png_bytes(tmp_path):
    path = tmp_path / "m.png"
    write_mask(SegmentationMask(np.array([[0, 1], [1, 0]])), path, "png")
    with Image.open(path) as img:
        assert img.mode == "L"
        assert list(np.array(img).ravel()) == [0, 255, 255, 0]


@pytest.mark.parametrize("fmt", ["png", "mrc"])
def test_mask_roundtrip_bit_exact(tmp_path, fmt):
    mask = (np.random.default_rng(4).random((31, 17)) > 0.5).astype(np.uint8)
    path = tmp_path / f"m.{fmt}"
    write_mask(SegmentationMask(mask), path, fmt)
    back = read_micrograph(path).pixels
    if fmt == "png":
        back = back / 255
    np.testing.assert_array_equal(back, mask)


def test_mask_mrc_is_mode0(tmp_path):
    path = tmp_path / "m.mrc"
    write_mask(SegmentationMask(np.eye(3, dtype=np.uint8)), path, "mrc")
    with mrcfile.open(str(path)) as f:
        assert int(f.header.mode) == 0
        np.testing.assert_array_equal(f.data, np.eye(3))


def test_mask_upsample_nearest(tmp_path):
    path = tmp_path / "m.mrc"
    write_mask(SegmentationMask(np.array([[0, 1], [1, 0]])), path, "mrc", upsample_to=(4, 4))
    expected = np.kron([[0, 1], [1, 0]], np.ones((2, 2)))
    np.testing.assert_array_equal(read_micrograph(path).pixels, expected)


def test_restore_geometry_non_square():
    mask = np.array([[1, 0], [0, 1]])
    out = restore_geometry(mask, (4, 8))
    assert out.shape == (4, 8)
    assert np.all(out[:, :2] == 0) and np.all(out[:, 6:] == 0)
    np.testing.assert_array_equal(out[:, 2:6], np.kron(mask, np.ones((2, 2))))


def test_upsample_identity():
    m = np.arange(12).reshape(3, 4)
    np.testing.assert_array_equal(upsample_nearest(m, (3, 4)), m)


def test_mask_rejects_non_binary():
    with pytest.raises(ValueError):
        SegmentationMask(np.array([[0, 2]]))


def test_downsample_warning_free_on_regular_input():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        downsample(Micrograph(np.ones((8, 8))), 4)
