"""
增强流水线测试
"""

import numpy as np
import pytest

from augment import (
    AugmentConfig,
    CutoutParams,
    ImageShapeError,
    TRANSFORMS,
    TransformRangeError,
    WeakParams,
    apply_cutout,
    apply_transform,
    apply_weak,
    cutout,
    derive_seed,
    make_rng,
    rotate90,
    strong_augment,
    weak_augment,
)
from augment.pipeline import sample_strong_params
from conftest import quantized_image


@pytest.mark.parametrize("name,magnitude", [
    ("identity", None),
    ("posterize", 8),
    ("solarize", 1.0),
    ("rotate", 0.0),
    ("shear_x", 0.0),
    ("shear_y", 0.0),
    ("translate_x", 0.0),
    ("translate_y", 0.0),
])
def test_identity_magnitudes_are_exact(image, name, magnitude):
    out = apply_transform(image, name, magnitude)
    np.testing.assert_array_equal(out, image)
    assert out.dtype == np.float32


def test_translate_moves_content(image):
    img = np.zeros((3, 32, 32), dtype=np.float32)
    img[:, :, 10] = 1.0
    out = apply_transform(img, "translate_x", 0.25)
    np.testing.assert_array_equal(out[:, :, 18], 1.0)
    assert out[:, :, 10].max() == 0.0
    assert out[:, :, :8].max() == 0.0


def test_brightness_scales_pixels(image):
    out = apply_transform(image, "brightness", 0.5)
    np.testing.assert_allclose(out, image * 0.5, atol=1e-7)


def test_magnitude_out_of_range():
    img = quantized_image(1, 8)
    with pytest.raises(TransformRangeError):
        apply_transform(img, "brightness", 0.99)
    with pytest.raises(TransformRangeError):
        apply_transform(img, "posterize", 3)
    with pytest.raises(TransformRangeError):
        apply_transform(img, "rotate", None)
    with pytest.raises(TransformRangeError):
        apply_transform(img, "warp", 0.1)


def test_image_shape_checked():
    with pytest.raises(ImageShapeError):
        apply_transform(np.zeros((8, 8), dtype=np.float32), "identity")


@pytest.mark.parametrize("name", sorted(TRANSFORMS))
def test_each_transform_stays_in_range(name):
    spec = TRANSFORMS[name]
    img = quantized_image(2, 16)
    for magnitude in ([None] if spec.magnitude_range is None else spec.magnitude_range):
        out = apply_transform(img, spec, magnitude)
        assert out.shape == img.shape
        assert out.min() >= 0.0 and out.max() <= 1.0


def test_augmented_views_stay_in_unit_range():
    img = quantized_image(3, 12)
    for seed in range(1000):
        strong = strong_augment(img, make_rng(seed, "strong"))
        weak = weak_augment(img, make_rng(seed, "weak"))
        for out in (strong, weak):
            assert out.shape == img.shape
            assert out.dtype == np.float32
            assert 0.0 <= out.min() and out.max() <= 1.0


def test_same_subkey_replays_same_view(image):
    a = strong_augment(image, make_rng(7, 3, 1, "u_second"))
    b = strong_augment(image, make_rng(7, 3, 1, "u_second"))
    c = strong_augment(image, make_rng(7, 3, 2, "u_second"))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_substreams():
    a = make_rng(0, "x", 1).random(4)
    np.testing.assert_array_equal(a, make_rng(0, "x", 1).random(4))
    assert not np.array_equal(a, make_rng(0, "x", 2).random(4))
    assert not np.array_equal(a, make_rng(1, "x", 1).random(4))
    assert derive_seed(0, "split", 0) == derive_seed(0, "split", 0)
    assert 0 <= derive_seed(5, "init") < 2 ** 63
    with pytest.raises(ValueError):
        make_rng(0, -1)


def test_strong_params_respect_table():
    for seed in range(50):
        params = sample_strong_params(make_rng(seed), 32, 32)
        assert len(params.ops) == 2
        for name, magnitude in params.ops:
            TRANSFORMS[name].check(magnitude)
        assert params.cutout.side == 16


def test_strong_params_without_replacement_are_distinct():
    cfg = AugmentConfig(with_replacement=False)
    for seed in range(50):
        params = sample_strong_params(make_rng(seed), 32, 32, cfg)
        assert params.ops[0][0] != params.ops[1][0]


def test_weak_without_flip_at_pad_offset_is_identity(image):
    out = apply_weak(image, WeakParams(flip=False, top=4, left=4, pad=4))
    np.testing.assert_array_equal(out, image)
    flipped = apply_weak(image, WeakParams(flip=True, top=4, left=4, pad=4))
    np.testing.assert_array_equal(flipped, image[:, :, ::-1])


def test_weak_crop_shift(image):
    out = apply_weak(image, WeakParams(flip=False, top=4, left=6, pad=4))
    np.testing.assert_array_equal(out[:, :, :-2], image[:, :, 2:])


def test_cutout_square_is_clipped_at_border(image):
    out = apply_cutout(image, CutoutParams(center_y=0, center_x=0, side=16))
    assert np.all(out[:, :8, :8] == 0.5)
    np.testing.assert_array_equal(out[:, 8:, :], image[:, 8:, :])
    np.testing.assert_array_equal(out[:, :8, 8:], image[:, :8, 8:])


def test_cutout_zero_side_is_identity(image):
    out = cutout(image, make_rng(0), AugmentConfig(cutout_side=0))
    np.testing.assert_array_equal(out, image)


def test_rotate90(image):
    np.testing.assert_array_equal(rotate90(image, 0), image)
    # 逆时针: 最后一列转到第一行
    np.testing.assert_array_equal(rotate90(image, 1)[:, 0, :], image[:, :, -1])
    out = image
    for _ in range(4):
        out = rotate90(out, 1)
    np.testing.assert_array_equal(out, image)
    np.testing.assert_array_equal(rotate90(rotate90(image, 1), 3), image)


def test_cutout_area_is_bounded_by_side_squared():
    ones = np.ones((3, 16, 16), dtype=np.float32)
    side = AugmentConfig().side_for(16)
    for seed in range(200):
        out = cutout(ones, make_rng(seed, "cutout"))
        filled = out[0] == 0.5
        assert filled.sum() <= side * side
        assert filled.sum() > 0
        rows, cols = np.flatnonzero(filled.any(axis=1)), np.flatnonzero(filled.any(axis=0))
        assert filled.sum() == len(rows) * len(cols)
        assert np.all(out[:, ~filled] == 1.0)


@pytest.mark.parametrize("r, corner", [(0, (0, 0)), (1, (7, 0)), (2, (7, 7)), (3, (0, 7))])
def test_rotate90_moves_top_left_corner(r, corner):
    img = np.zeros((3, 8, 8), dtype=np.float32)
    img[:, 0, 0] = 1.0
    out = rotate90(img, r)
    lit = np.argwhere(out[0] == 1.0)
    assert lit.tolist() == [list(corner)]


def test_rotate90_errors(image):
    with pytest.raises(ImageShapeError):
        rotate90(np.zeros((3, 8, 6), dtype=np.float32), 1)
    with pytest.raises(ValueError):
        rotate90(image, 4)
