import json

import numpy as np
import pytest

from strokebench.core.augment import (
    STRONG,
    WEAK,
    OnlineAugmenter,
    add_gaussian_noise,
    adjust_photometric,
    color_jitter,
    flip_h,
    gaussian_blur,
    generate_offline,
    is_small_stroke,
    make_rng,
    overlay_glare,
    overlay_shadow,
    rotate,
    sample_profile,
    sharpen,
    shift_temperature,
    variant_seed,
    write_variants,
)
from strokebench.core.imgcore import BinaryMask, RgbImage
from strokebench.core.morphology import erode_rect


def _board(width=32, height=24):
    rng = np.random.default_rng(0)
    data = rng.integers(150, 230, size=(height, width, 3)).astype(np.uint8)
    mask = np.zeros((height, width), dtype=bool)
    mask[10:14, 4:28] = True
    data[mask] = 40
    return RgbImage(data), BinaryMask(mask)


def _gray(value):
    return RgbImage(np.full((2, 2, 3), value, dtype=np.uint8))


def test_photometric_identity_and_hand_values():
    img, _ = _board()

    assert adjust_photometric(img) == img
    assert adjust_photometric(_gray(128), brightness=1.3).data[0, 0, 0] == 166
    assert adjust_photometric(_gray(128), gamma=0.7).data[0, 0, 0] > 128


def test_photometric_ranges_are_enforced():
    with pytest.raises(ValueError):
        adjust_photometric(_gray(128), brightness=1.5)
    with pytest.raises(ValueError):
        adjust_photometric(_gray(128), gamma=0.5)


def test_blur_and_noise():
    flat = RgbImage(np.full((9, 9, 3), 120, dtype=np.uint8))
    img, _ = _board()

    assert gaussian_blur(flat, 1.2) == flat
    assert add_gaussian_noise(img, 4.0, seed=9) == add_gaussian_noise(img, 4.0, seed=9)
    assert add_gaussian_noise(img, 4.0, seed=9) != add_gaussian_noise(img, 4.0, seed=10)
    with pytest.raises(ValueError):
        add_gaussian_noise(img, 0.0, seed=9)


def test_temperature_and_sharpen():
    warm = shift_temperature(_gray(100), 0.1).data[0, 0]

    assert warm.tolist() == [110, 100, 90]
    assert sharpen(_gray(100)) == _gray(100)


def test_variant_seed_depends_on_every_input():
    seed = variant_seed(0, "3", 0)

    assert seed == variant_seed(0, "3", 0)
    assert seed != variant_seed(1, "3", 0)
    assert seed != variant_seed(0, "13", 0)
    assert seed != variant_seed(0, "3", 1)


def test_profile_sampler_is_weak_seventy_percent_of_the_time():
    kinds = [sample_profile(seed).kind for seed in range(10000)]

    share = kinds.count(WEAK) / len(kinds)
    assert 0.68 < share < 0.72
    assert set(kinds) == {WEAK, STRONG}


def test_weak_parameters_stay_in_declared_ranges():
    for seed in range(200):
        profile = sample_profile(seed)
        if profile.kind != WEAK:
            continue
        p = profile.params
        assert 0.7 <= p["brightness"] <= 1.3
        assert 0.8 <= p["contrast"] <= 1.2
        assert 0.7 <= p["gamma"] <= 1.4
        assert 0.3 <= p["blur_sigma"] <= 1.5


def test_gentle_profile_halves_blur_and_noise():
    seed = next(s for s in range(100) if sample_profile(s).kind == WEAK)

    normal = sample_profile(seed).params
    gentle = sample_profile(seed, gentle=True).params

    assert gentle["blur_sigma"] == pytest.approx(normal["blur_sigma"] / 2)
    assert gentle["noise_sigma"] == pytest.approx(normal["noise_sigma"] / 2)
    assert is_small_stroke("22") and is_small_stroke("37")
    assert not is_small_stroke("3") and not is_small_stroke("38")


def test_offline_generation_is_deterministic_across_workers():
    img, mask = _board()

    serial = generate_offline(img, mask, "14", n=6, master_seed=5, workers=1)
    threaded = generate_offline(img, mask, "14", n=6, master_seed=5, workers=4)

    assert [v.name for v in serial] == [f"image_14_aug{k}" for k in range(6)]
    for a, b in zip(serial, threaded):
        assert a.image == b.image
        assert a.profile == b.profile
        assert a.mask == mask


def test_write_variants_emits_png_pairs_and_provenance(tmp_path):
    img, mask = _board()
    variants = generate_offline(img, mask, "3", n=2)

    write_variants(tmp_path, variants)

    provenance = json.loads((tmp_path / "image_3_aug1.json").read_text(encoding="utf-8"))
    assert (tmp_path / "image_3_aug0.png").exists()
    assert (tmp_path / "image_3_aug0_mask.png").exists()
    assert provenance["profile"] in (WEAK, STRONG)
    assert provenance["seed"] == variant_seed(0, "3", 1)
    assert "ranges" in provenance


def test_geometric_ops():
    img, mask = _board()

    assert flip_h(*flip_h(img, mask)) == (img, mask)
    assert rotate(img, mask, 0) == (img, mask)
    rotated_img, rotated_mask = rotate(img, mask, 7.5)
    assert (rotated_img.width, rotated_img.height) == (img.width, img.height)
    assert rotated_mask.count() > 0
    with pytest.raises(ValueError):
        rotate(img, mask, 12)


def test_glare_and_shadow():
    flat = RgbImage(np.full((10, 20, 3), 100, dtype=np.uint8))

    glared = overlay_glare(flat, 0, 0.4).data
    assert glared[:, -1].mean() > glared[:, 0].mean()
    with pytest.raises(ValueError):
        overlay_glare(flat, 30, 0.4)

    shaded = overlay_shadow(flat, 4, 0.5, offset=2).data
    assert shaded[0, 2:6, 0].tolist() == [50, 50, 50, 50]
    assert shaded[0, 10, 0] == 100


def test_colour_jitter_identity():
    img, _ = _board()

    assert color_jitter(img, 1.0, 1.0, 1.0) == img


def test_online_augmenter_is_seeded_and_erodes_masks():
    img, mask = _board()
    kwargs = dict(flip_p=0.0, rotate_p=0.0, blur_p=0.0, sharpen_p=0.0, erode_p=1.0)

    first = OnlineAugmenter(seed=3, **kwargs)(img, mask)
    second = OnlineAugmenter(seed=3, **kwargs)(img, mask)

    assert first == second
    assert first[1] == erode_rect(mask, 2, 2)


def test_online_enhancement_draws_brightness_and_contrast_from_the_seed():
    img, mask = _board()
    kwargs = dict(
        flip_p=0.0,
        rotate_p=0.0,
        jitter_brightness=0.0,
        jitter_contrast=0.0,
        jitter_saturation=0.0,
        enhance_p=1.0,
        blur_p=0.0,
        sharpen_p=0.0,
        erode_p=0.0,
    )

    out_img, out_mask = OnlineAugmenter(seed=11, **kwargs)(img, mask)

    rng = make_rng(11)
    rng.random(), rng.random()
    rng.uniform(1.0, 1.0, size=3)
    rng.random()
    brightness, contrast = rng.uniform(0.7, 1.3), rng.uniform(0.8, 1.2)
    assert out_img == adjust_photometric(img, float(brightness), float(contrast))
    assert out_mask == mask


def test_online_enhancement_can_be_disabled():
    img, mask = _board()
    kwargs = dict(
        flip_p=0.0,
        rotate_p=0.0,
        jitter_brightness=0.0,
        jitter_contrast=0.0,
        jitter_saturation=0.0,
        enhance_p=0.0,
        blur_p=0.0,
        sharpen_p=0.0,
        erode_p=0.0,
    )

    assert OnlineAugmenter(seed=11, **kwargs)(img, mask) == (img, mask)


def test_photometric_commutes_with_horizontal_flip():
    img, mask = _board()

    for brightness, contrast, gamma in [(1.3, 0.8, 0.7), (0.7, 1.2, 1.4), (1.1, 1.0, 1.0)]:
        flipped_first, _ = flip_h(adjust_photometric(img, brightness, contrast, gamma), mask)
        adjusted_after = adjust_photometric(flip_h(img, mask)[0], brightness, contrast, gamma)
        assert flipped_first == adjusted_after
