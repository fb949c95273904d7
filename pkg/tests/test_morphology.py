import itertools

import numpy as np
import pytest
from scipy import ndimage

from strokebench.core.imgcore import BinaryMask
from strokebench.core.morphology import (
    StructuringElement,
    dilate,
    edt,
    erode,
    erode_rect,
    morph_gradient,
    skeletonize,
)


def _brute_edt(seeds):
    points = np.argwhere(seeds)
    pixels = np.argwhere(np.ones(seeds.shape, dtype=bool))
    squared = ((pixels[:, None, :] - points[None, :, :]) ** 2).sum(axis=2).min(axis=1)
    return np.sqrt(squared).reshape(seeds.shape)


def _brute_dilate(mask, radius):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y, x in itertools.product(range(h), range(w)):
        window = mask[max(0, y - radius) : y + radius + 1, max(0, x - radius) : x + radius + 1]
        out[y, x] = window.any()
    return out


def test_edt_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        h, w = rng.integers(1, 65, size=2)
        seeds = rng.random((h, w)) < rng.uniform(0.002, 0.05)
        if not seeds.any():
            seeds[0, 0] = True
        field = edt(BinaryMask(seeds))
        assert np.allclose(field.data, _brute_edt(seeds), atol=1e-12)


def test_edt_without_seeds_uses_sentinel():
    field = edt(BinaryMask(np.zeros((3, 4), dtype=bool)))

    assert field.sentinel == 8.0
    assert np.all(field.data == 8.0)


def test_dilate_matches_brute_force_for_several_sizes():
    rng = np.random.default_rng(3)
    for size in (1, 3, 5, 7):
        mask = rng.random((12, 9)) < 0.08
        grown = dilate(BinaryMask(mask), StructuringElement(size))
        assert np.array_equal(grown.data, _brute_dilate(mask, size // 2))


def test_erode_treats_outside_as_background():
    full = BinaryMask(np.ones((4, 4), dtype=bool))

    eroded = erode(full)

    expected = np.zeros((4, 4), dtype=bool)
    expected[1:3, 1:3] = True
    assert np.array_equal(eroded.data, expected)


def test_gradient_of_single_pixel_is_its_neighbourhood():
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 2] = True

    contour = morph_gradient(BinaryMask(mask))

    assert contour.count() == 9
    assert contour.data[1:4, 1:4].all()


def test_erode_rect_anchors_top_left():
    mask = np.zeros((4, 4), dtype=bool)
    mask[1:3, 1:3] = True

    eroded = erode_rect(BinaryMask(mask), 2, 2)

    assert np.argwhere(eroded.data).tolist() == [[1, 1]]


def test_structuring_element_validation():
    with pytest.raises(ValueError):
        StructuringElement(4)
    with pytest.raises(ValueError):
        StructuringElement(3, shape="disk")


def test_skeleton_of_thin_line_is_the_line():
    mask = np.zeros((7, 12), dtype=bool)
    mask[3, 2:10] = True

    skeleton = skeletonize(BinaryMask(mask))

    assert np.array_equal(skeleton.data, mask)


def test_skeleton_of_bar_lies_on_its_centre_row():
    mask = np.zeros((9, 40), dtype=bool)
    mask[2:7, 2:38] = True

    skeleton = skeletonize(BinaryMask(mask))

    rows = np.argwhere(skeleton.data)[:, 0]
    assert skeleton.count() > 20
    assert (skeleton.data & ~mask).sum() == 0
    assert np.count_nonzero(rows == 4) >= 20


def _random_blobs(rng, shape, count):
    mask = np.zeros(shape, dtype=bool)
    for _ in range(count):
        y, x = rng.integers(0, shape[0] - 2), rng.integers(0, shape[1] - 2)
        h, w = rng.integers(2, 12, size=2)
        mask[y : y + h, x : x + w] = True
    return mask


@pytest.mark.parametrize("size", [3, 5])
def test_erode_is_dual_to_dilate_on_padded_masks(size):
    rng = np.random.default_rng(21)
    radius = size // 2
    for _ in range(50):
        h, w = rng.integers(1, 30, size=2)
        mask = np.pad(rng.random((h, w)) < 0.6, radius, constant_values=False)
        se = StructuringElement(size)

        eroded = erode(BinaryMask(mask), se).data
        dual = ~dilate(BinaryMask(~mask), se).data

        assert np.array_equal(eroded, dual)


def test_gradient_of_block_is_a_two_pixel_ring():
    mask = np.zeros((7, 7), dtype=bool)
    mask[2:5, 2:5] = True

    contour = morph_gradient(BinaryMask(mask))

    expected = np.zeros((7, 7), dtype=bool)
    expected[1:6, 1:6] = True
    expected[3, 3] = False
    assert np.array_equal(contour.data, expected)


def test_no_skeleton_pixel_has_a_full_neighbourhood():
    rng = np.random.default_rng(5)
    for _ in range(30):
        mask = _random_blobs(rng, (40, 48), count=int(rng.integers(1, 6)))

        skeleton = skeletonize(BinaryMask(mask))

        assert erode(skeleton).count() == 0
        assert (skeleton.data & ~mask).sum() == 0


def test_skeleton_of_short_bar():
    mask = np.zeros((7, 11), dtype=bool)
    mask[2:5, 2:9] = True

    skeleton = skeletonize(BinaryMask(mask)).data

    # middle row survives; only the end columns may step off it
    assert skeleton[3, 3:7].all()
    off_row = np.argwhere(skeleton & (np.arange(7)[:, None] != 3))
    assert len(off_row) <= 2
    assert all(col in (2, 3, 7, 8) for _, col in off_row)
    assert (skeleton & ~mask).sum() == 0
    assert ndimage.label(skeleton, structure=np.ones((3, 3)))[1] == 1
    assert erode(BinaryMask(skeleton)).count() == 0
