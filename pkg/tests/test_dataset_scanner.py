import pytest

from strokebench.data.dataset_scanner import pair_directories, parse_stem, scan_images, training_files


def _touch(directory, *names):
    directory.mkdir(parents=True, exist_ok=True)
    for name in names:
        (directory / name).write_bytes(b"")


def test_parse_stem_conventions():
    assert parse_stem("image_3") == ("3", False, False)
    assert parse_stem("image_3_mask") == ("3", True, False)
    assert parse_stem("image_14_aug2") == ("14", False, True)
    assert parse_stem("image_14_aug2_mask") == ("14", True, True)
    assert parse_stem("photo_3") is None


def test_pair_directories_matches_ids_and_lists_leftovers(tmp_path):
    images = tmp_path / "images"
    masks = tmp_path / "masks"
    _touch(images, "image_3.png", "image_13.png", "image_22.png", "notes.txt")
    _touch(masks, "image_3_mask.png", "image_13_mask.png", "image_28_mask.png")

    result = pair_directories(images, masks)

    assert [pair.image_id for pair in result.pairs] == ["3", "13"]
    assert [path.name for path in result.only_first] == ["image_22.png"]
    assert [path.name for path in result.only_second] == ["image_28_mask.png"]
    assert not result.complete


def test_scan_skips_augmented_variants(tmp_path):
    _touch(tmp_path, "image_3.png", "image_3_aug0.png", "image_3_aug1.png")

    assert list(scan_images(tmp_path)) == ["3"]


def test_scan_rejects_missing_directory(tmp_path):
    with pytest.raises(ValueError):
        scan_images(tmp_path / "missing")


def test_training_files_drop_held_out_ids_and_their_variants(tmp_path):
    _touch(
        tmp_path,
        "image_3.png",
        "image_3_aug0.png",
        "image_4.png",
        "image_4_aug0.png",
        "image_30_aug0.png",
    )

    kept = [path.name for path in training_files(tmp_path, ["3"])]

    assert kept == ["image_30_aug0.png", "image_4.png", "image_4_aug0.png"]
