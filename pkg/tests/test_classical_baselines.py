import numpy as np
import pytest

from strokebench.core.classical_baselines import (
    ADAPTIVE,
    OTSU,
    SAUVOLA,
    AdaptiveParams,
    SauvolaParams,
    adaptive_gaussian,
    gaussian_kernel1d,
    local_mean_std,
    otsu,
    run_baseline,
    sauvola,
    sauvola_threshold,
)
from strokebench.core.imgcore import GrayImage


def _board_with_line(value=100):
    board = np.full((60, 60), 200, dtype=np.uint8)
    board[30, 5:55] = value
    return board


def _between_class_variance(values, t):
    low = values[values <= t].astype(np.float64)
    high = values[values > t].astype(np.float64)
    if low.size == 0 or high.size == 0:
        return 0.0
    return low.size * high.size * (low.mean() - high.mean()) ** 2


def test_otsu_splits_bimodal_image_at_lowest_maximiser():
    img = np.full((10, 10), 200, dtype=np.uint8)
    img[:, :5] = 50

    result = otsu(GrayImage(img))

    assert result.threshold == 50
    assert not result.degenerate
    assert np.array_equal(result.mask.data, img == 50)


def test_otsu_threshold_maximises_between_class_variance():
    rng = np.random.default_rng(4)
    values = np.concatenate([rng.normal(60, 15, 300), rng.normal(190, 20, 500)])
    img = np.clip(values, 0, 255).astype(np.uint8).reshape(20, 40)

    result = otsu(GrayImage(img))

    best = max(_between_class_variance(img, t) for t in range(256))
    assert _between_class_variance(img, result.threshold) == pytest.approx(best, rel=1e-9)


def test_otsu_constant_image_is_flagged():
    result = otsu(GrayImage(np.full((5, 5), 90, dtype=np.uint8)))

    assert result.degenerate
    assert result.mask.count() == 0


def test_adaptive_gaussian_finds_dark_line_only():
    img = _board_with_line()

    mask = adaptive_gaussian(GrayImage(img))

    assert np.array_equal(mask.data, img == 100)


def test_adaptive_parameters_are_validated():
    assert AdaptiveParams().sigma == pytest.approx(8.0)
    with pytest.raises(ValueError):
        AdaptiveParams(block=50)


def test_local_mean_std_matches_clipped_windows():
    rng = np.random.default_rng(8)
    img = rng.integers(0, 256, size=(9, 11)).astype(np.uint8)

    mean, std = local_mean_std(GrayImage(img), 5)

    for y in range(9):
        for x in range(11):
            window = img[max(0, y - 2) : y + 3, max(0, x - 2) : x + 3].astype(np.float64)
            assert mean[y, x] == pytest.approx(window.mean())
            assert std[y, x] == pytest.approx(window.std(), abs=1e-6)


def test_sauvola_threshold_on_flat_region():
    flat = GrayImage(np.full((20, 20), 200, dtype=np.uint8))

    assert np.allclose(sauvola_threshold(flat, SauvolaParams()), 160.0)
    assert sauvola(flat).count() == 0


def test_sauvola_finds_dark_line():
    img = _board_with_line(40)

    mask = sauvola(GrayImage(img))

    assert np.array_equal(mask.data, img == 40)


def test_gaussian_kernel_is_normalised_and_symmetric():
    kernel = gaussian_kernel1d(1.5, 5)

    assert kernel.sum() == pytest.approx(1.0)
    assert np.allclose(kernel, kernel[::-1])
    with pytest.raises(ValueError):
        gaussian_kernel1d(0.0, 3)


def test_run_baseline_dispatch():
    img = GrayImage(_board_with_line(40))

    assert run_baseline(img, OTSU).threshold == 40
    assert run_baseline(img, ADAPTIVE).threshold is None
    assert run_baseline(img, SAUVOLA, SauvolaParams(window=31)).mask.count() == 50
    with pytest.raises(ValueError):
        run_baseline(img, "niblack")


def test_sauvola_threshold_hand_value():
    img = GrayImage(np.array([[64, 192], [192, 64]], dtype=np.uint8))

    mean, std = local_mean_std(img, 3)
    threshold = sauvola_threshold(img, SauvolaParams(window=3))

    assert mean == pytest.approx(np.full((2, 2), 128.0))
    assert std == pytest.approx(np.full((2, 2), 64.0))
    assert threshold == pytest.approx(np.full((2, 2), 115.2))


def test_sauvola_with_zero_k_thresholds_at_the_local_mean():
    rng = np.random.default_rng(4)
    img = GrayImage(rng.integers(0, 256, size=(23, 31)).astype(np.uint8))

    mean, _ = local_mean_std(img, 7)

    assert np.array_equal(sauvola_threshold(img, SauvolaParams(window=7, k=0.0)), mean)


@pytest.mark.parametrize("method", [OTSU, ADAPTIVE, SAUVOLA])
def test_baselines_commute_with_mirroring(method):
    rng = np.random.default_rng(8)
    data = rng.integers(0, 256, size=(40, 57)).astype(np.uint8)
    data[18:21, 5:50] = 20

    mask = run_baseline(GrayImage(data), method).mask.data

    for axis in (0, 1):
        mirrored = run_baseline(GrayImage(np.flip(data, axis=axis).copy()), method).mask.data
        assert np.array_equal(mirrored, np.flip(mask, axis=axis))


def test_otsu_threshold_survives_duplicating_the_image():
    rng = np.random.default_rng(15)
    data = rng.integers(0, 256, size=(30, 20)).astype(np.uint8)

    single = otsu(GrayImage(data))
    doubled = otsu(GrayImage(np.hstack([data, data])))

    assert doubled.threshold == single.threshold
    assert np.array_equal(doubled.mask.data, np.hstack([single.mask.data, single.mask.data]))
