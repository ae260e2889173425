import numpy as np
import pytest

from segqa import raster
from segqa.errors import CalibrationError, ContractViolation, FormatError, ValidationError

from conftest import write_png


def test_load_1x1_black_png(tmp_path):
    p = write_png(tmp_path / "a.png", np.zeros((1, 1), np.uint8))
    img = raster.load_image(p)
    assert (img.width, img.height, img.channels) == (1, 1, 1)
    assert img.pixels[0, 0] == 0


def test_rgb_luma_of_pure_red_is_76(tmp_path):
    arr = np.zeros((2, 2, 3), np.uint8)
    arr[0, 0] = (255, 0, 0)
    img = raster.load_image(write_png(tmp_path / "rgb.png", arr))
    assert img.channels == 3
    assert img.luma()[0, 0] == 76  # round(0.299 * 255)
    assert img.luma()[1, 1] == 0


def test_16bit_png_rejected(tmp_path):
    p = write_png(tmp_path / "deep.png", np.zeros((2, 2), np.uint16))
    with pytest.raises(FormatError, match="bit depth|mode"):
        raster.load_image(p)


def test_rgba_png_rejected(tmp_path):
    p = write_png(tmp_path / "rgba.png", np.zeros((2, 2, 4), np.uint8))
    with pytest.raises(FormatError):
        raster.load_image(p)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        raster.load_image("/nonexistent/nope.png")


def test_luma_range_and_determinism():
    rng = np.random.default_rng(3)
    arr = rng.integers(0, 256, (32, 32, 3)).astype(np.uint8)
    img = raster.Image(arr)
    y1, y2 = img.luma(), img.luma()
    assert np.array_equal(y1, y2)
    assert y1.dtype == np.uint8  # values necessarily within [0, 255]
    # spot-check the rounding rule on the raw triples
    flat = arr.reshape(-1, 3).astype(np.float64)
    expect = np.floor(flat @ np.array([0.299, 0.587, 0.114]) + 0.5)
    assert np.array_equal(y1.reshape(-1).astype(np.float64), expect)


def test_load_segmentation_all_zero(tmp_path):
    p = write_png(tmp_path / "c0.png", np.zeros((4, 5), np.uint8))
    seg = raster.load_segmentation([p])
    assert seg.num_classes == 1
    assert not seg.channel(0).any()


def test_load_segmentation_dimension_mismatch(tmp_path):
    a = write_png(tmp_path / "a.png", np.zeros((4, 5), np.uint8))
    b = write_png(tmp_path / "b.png", np.zeros((5, 4), np.uint8))
    with pytest.raises(ValidationError, match="dimensions"):
        raster.load_segmentation([a, b])


def test_load_segmentation_nonbinary_pixel(tmp_path):
    arr = np.zeros((3, 3), np.uint8)
    arr[2, 1] = 128
    p = write_png(tmp_path / "bad.png", arr)
    with pytest.raises(ValidationError, match=r"\(x=1, y=2\)"):
        raster.load_segmentation([p])


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    for i in range(5):
        mask = rng.random((11, 7)) < 0.5
        p = tmp_path / f"m{i}.png"
        raster.save_mask(mask, p)
        assert np.array_equal(raster.load_mask(p), mask)


def test_load_probability_one_hot(tmp_path):
    a = write_png(tmp_path / "p0.png", np.full((2, 2), 65535, np.uint16))
    b = write_png(tmp_path / "p1.png", np.zeros((2, 2), np.uint16))
    pm = raster.load_probability([a, b])
    assert pm.num_classes == 2
    assert np.array_equal(pm.data[0], np.ones((2, 2)))
    assert np.array_equal(pm.data[1], np.zeros((2, 2)))


def test_load_probability_half_half_within_tolerance(tmp_path):
    a = write_png(tmp_path / "p0.png", np.full((2, 2), 32768, np.uint16))
    b = write_png(tmp_path / "p1.png", np.full((2, 2), 32768, np.uint16))
    pm = raster.load_probability([a, b])
    assert pm.data.sum(axis=0) == pytest.approx(2 * 32768 / 65535)


def test_load_probability_sum_out_of_tolerance(tmp_path):
    a = write_png(tmp_path / "p0.png", np.full((2, 2), 65535, np.uint16))
    b = write_png(tmp_path / "p1.png", np.full((2, 2), 65535, np.uint16))
    with pytest.raises(CalibrationError, match="sum"):
        raster.load_probability([a, b])


def test_load_probability_rejects_8bit(tmp_path):
    p = write_png(tmp_path / "p8.png", np.zeros((2, 2), np.uint8))
    with pytest.raises(FormatError, match="16-bit"):
        raster.load_probability([p])


def test_probability_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    raw = rng.random((3, 6, 6))
    data = raw / raw.sum(axis=0)
    pm = raster.ProbabilityMap(data)
    paths = [tmp_path / f"q{i}.png" for i in range(3)]
    raster.save_probability(pm, paths)
    back = raster.load_probability(paths)
    assert np.abs(back.data - data).max() <= 0.5 / 65535 + 1e-12


def test_import_labelmap_empty(tmp_path):
    p = write_png(tmp_path / "lab.png", np.zeros((3, 3), np.uint8))
    seg = raster.import_labelmap(p, 1)
    assert seg.num_classes == 1 and not seg.channel(0).any()


def test_import_labelmap_partitions_support(tmp_path):
    arr = np.array([[0, 1, 2], [2, 1, 0]], np.uint8)
    p = write_png(tmp_path / "lab.png", arr)
    seg = raster.import_labelmap(p, 2)
    assert not (seg.channel(0) & seg.channel(1)).any()
    assert np.array_equal(seg.channel(0) | seg.channel(1), arr > 0)


def test_import_labelmap_value_too_large(tmp_path):
    arr = np.array([[0, 3]], np.uint8)
    p = write_png(tmp_path / "lab.png", arr)
    with pytest.raises(ValidationError, match="exceeds"):
        raster.import_labelmap(p, 2)


def test_types_are_immutable():
    img = raster.Image(np.zeros((2, 2), np.uint8))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1
    seg = raster.SegmentationMap(np.zeros((1, 2, 2), bool))
    with pytest.raises(ValueError):
        seg.data[0, 0, 0] = True


def test_bad_shapes_rejected():
    with pytest.raises(ContractViolation):
        raster.Image(np.zeros((0, 3), np.uint8))
    with pytest.raises(ContractViolation):
        raster.Image(np.zeros((2, 2, 2), np.uint8))
    with pytest.raises(ContractViolation):
        raster.SegmentationMap(np.zeros((2, 2), bool))
