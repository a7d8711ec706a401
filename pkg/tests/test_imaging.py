import math
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsrkit.imaging import (ImageError, bicubic_downsample, bicubic_upsample, format_db,
                            image_to_tensor, load_png, psnr, resize_bicubic, sample_patches,
                            save_png, tensor_to_image)
from nsrkit.engine import Tensor
from oracles import bicubic_kernel_sum, psnr_loops


def _png_bytes(rows, color_type=2, bit_depth=8):
    """Minimal PNG encoder: one IDAT, filter type 0 on every scanline."""
    def chunk(tag, data):
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data))

    h, w = len(rows), len(rows[0])
    raw = b"".join(b"\x00" + bytes(v for px in row for v in px) for row in rows)
    ihdr = struct.pack(">IIBBBBB", w, h, bit_depth, color_type, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b"")


# -- PNG I/O --------------------------------------------------------------------

def test_png_roundtrip_within_quantization(tmp_path):
    img = np.random.default_rng(0).random((7, 5, 3)).astype(np.float32)
    save_png(img, tmp_path / "a.png")
    back = load_png(tmp_path / "a.png")
    assert back.shape == img.shape and back.dtype == np.float32
    assert np.abs(back - img).max() <= 1 / 255 + 1e-7


def test_png_roundtrip_of_quantized_values_is_exact(tmp_path):
    img = (np.random.default_rng(1).integers(0, 256, (4, 4, 3)) / 255).astype(np.float32)
    save_png(img, tmp_path / "q.png")
    np.testing.assert_array_equal(load_png(tmp_path / "q.png"), img)


def test_load_hand_built_png(tmp_path):
    rows = [[(0, 128, 255), (10, 20, 30)], [(255, 255, 255), (1, 2, 3)]]
    p = tmp_path / "fixture.png"
    p.write_bytes(_png_bytes(rows))
    expected = np.array(rows, dtype=np.float32) / np.float32(255)
    np.testing.assert_array_equal(load_png(p), expected)


def test_grayscale_png_promoted_to_rgb(tmp_path):
    p = tmp_path / "gray.png"
    p.write_bytes(_png_bytes([[(0,), (51,)], [(102,), (255,)]], color_type=0))
    img = load_png(p)
    assert img.shape == (2, 2, 3)
    np.testing.assert_array_equal(img[..., 0], img[..., 2])
    assert img[0, 1, 1] == np.float32(51) / np.float32(255)


def test_sixteen_bit_png_rejected(tmp_path):
    p = tmp_path / "deep.png"
    p.write_bytes(_png_bytes([[(0, 1, 0, 2, 0, 3)]], color_type=2, bit_depth=16))
    with pytest.raises(ImageError):
        load_png(p)


def test_non_image_file_errors(tmp_path):
    p = tmp_path / "notes.png"
    p.write_text("definitely not a PNG")
    with pytest.raises(ImageError, match="cannot decode"):
        load_png(p)


def test_failed_save_leaves_no_file(tmp_path):
    with pytest.raises(ImageError):
        save_png(np.zeros((4, 4)), tmp_path / "bad.png")
    assert list(tmp_path.iterdir()) == []


# -- resampling -------------------------------------------------------------------

def test_downsample_constant():
    out = bicubic_downsample(np.full((8, 6, 3), 0.5, np.float32), 2)
    assert out.shape == (4, 3, 3)
    assert np.abs(out - 0.5).max() <= 1e-6


def test_downsample_ramp_matches_kernel_sum_oracle():
    ramp = np.tile(np.linspace(0.1, 0.9, 12, dtype=np.float32)[None, :, None], (8, 1, 3))
    got = bicubic_downsample(ramp, 2)
    np.testing.assert_allclose(got, bicubic_kernel_sum(ramp.astype(np.float64), 4, 6), atol=1e-5)


def test_two_by_two_to_one_pixel():
    img = np.random.default_rng(3).random((2, 2, 3)).astype(np.float32)
    got = bicubic_downsample(img, 2)
    assert got.shape == (1, 1, 3)
    np.testing.assert_allclose(got, bicubic_kernel_sum(img.astype(np.float64), 1, 1), atol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_resize_matches_oracle_on_random_images(seed):
    rng = np.random.default_rng(seed)
    img = rng.random((int(rng.integers(3, 9)), int(rng.integers(3, 9)), 3)).astype(np.float32)
    oh, ow = int(rng.integers(1, 12)), int(rng.integers(1, 12))
    np.testing.assert_allclose(resize_bicubic(img, oh, ow),
                               bicubic_kernel_sum(img.astype(np.float64), oh, ow), atol=1e-5)


def test_downsample_non_divisible_errors():
    with pytest.raises(ImageError, match="not divisible"):
        bicubic_downsample(np.zeros((5, 4, 3)), 2)


def test_upsample_range_and_shape():
    img = np.random.default_rng(4).random((5, 6, 3)).astype(np.float32)
    out = bicubic_upsample(img, 2)
    assert out.shape == (10, 12, 3)
    assert out.min() >= 0.0 and out.max() <= 1.0


# -- patches ------------------------------------------------------------------------

def test_sample_patches_zero():
    assert sample_patches(np.zeros((8, 8, 3)), 0, 4, 2, np.random.default_rng(0)) == []


def test_sample_patches_deterministic_and_exact_windows():
    img = np.random.default_rng(5).random((20, 17, 3)).astype(np.float32)
    a = sample_patches(img, 6, 8, 2, np.random.default_rng(9))
    b = sample_patches(img, 6, 8, 2, np.random.default_rng(9))
    assert [(p.y, p.x) for p in a] == [(p.y, p.x) for p in b]
    for p in a:
        np.testing.assert_array_equal(p.hr, img[p.y:p.y + 8, p.x:p.x + 8])
        np.testing.assert_array_equal(p.lr, bicubic_downsample(p.hr, 2))
        assert p.lr.shape == (4, 4, 3)


def test_sample_patches_errors():
    with pytest.raises(ImageError, match="smaller"):
        sample_patches(np.zeros((6, 6, 3)), 1, 8, 2, np.random.default_rng(0))
    with pytest.raises(ImageError, match="divisible"):
        sample_patches(np.zeros((9, 9, 3)), 1, 7, 2, np.random.default_rng(0))


# -- PSNR ----------------------------------------------------------------------------

def test_psnr_twenty_db():
    a = np.full((4, 4, 3), 0.4)
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-12)


def test_psnr_identical_is_inf_sentinel():
    a = np.random.default_rng(0).random((3, 3, 3))
    assert psnr(a, a) == math.inf
    assert format_db(psnr(a, a)) == "inf"


def test_psnr_matches_loop_oracle():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = rng.random((5, 4, 3)).astype(np.float32)
        b = rng.random((5, 4, 3)).astype(np.float32)
        assert abs(psnr(a, b) - psnr_loops(a, b)) <= 1e-9


def test_psnr_dimension_mismatch():
    with pytest.raises(ImageError, match="mismatch"):
        psnr(np.zeros((2, 2, 3)), np.zeros((3, 2, 3)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_psnr_symmetric_and_monotone(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((6, 6, 3)) * 0.5 + 0.25
    b = rng.random((6, 6, 3))
    assert psnr(a, b) == psnr(b, a)
    direction = rng.choice([-1.0, 1.0], size=a.shape)
    values = [psnr(a, a + m * direction) for m in (0.01, 0.05, 0.1, 0.2)]
    assert all(x > y for x, y in zip(values, values[1:]))


# -- tensor layout -------------------------------------------------------------------

def test_tensor_round_trip_and_layout():
    img = np.random.default_rng(2).random((3, 4, 3)).astype(np.float32)
    t = image_to_tensor(img)
    assert t.shape == (1, 3, 3, 4)
    assert t.data[0, 0, 1, 2] == img[1, 2, 0]
    np.testing.assert_array_equal(tensor_to_image(t), img)


def test_tensor_to_image_clamps():
    t = Tensor(np.full((1, 3, 1, 1), 1.7, np.float32))
    assert tensor_to_image(t).max() == 1.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), h=st.integers(2, 10), w=st.integers(2, 10))
def test_public_ops_stay_in_range(seed, h, w):
    rng = np.random.default_rng(seed)
    img = (rng.random((2 * h, 2 * w, 3)) > 0.5).astype(np.float32)  # hard edges ring the most
    for out in (bicubic_downsample(img, 2), bicubic_upsample(img, 2), resize_bicubic(img, h + 1, w + 3)):
        assert out.min() >= 0.0 and out.max() <= 1.0
