import json

import numpy as np
import pytest

from strokebench.core.imgcore import BinaryMask, RgbImage, save_png
from strokebench.core.protocol import DEFAULT_CORE_IDS, DEFAULT_THIN_IDS, MetricRecord, image_sort_key
from strokebench.data.report_io import write_json
from strokebench.main import main

TEST_IDS = list(DEFAULT_CORE_IDS + DEFAULT_THIN_IDS)


def _gt(index):
    data = np.zeros((48, 64), dtype=bool)
    data[10 + index : 14 + index, 6:58] = True
    data[8:40, 30:33] = True
    return data


def _dataset(root, corrupt=True):
    pred_dir, gt_dir, img_dir = root / "pred", root / "gt", root / "images"
    rng = np.random.default_rng(1)
    for index, image_id in enumerate(TEST_IDS):
        gt = _gt(index)
        pred = gt.copy()
        if corrupt:
            pred ^= rng.random(gt.shape) < 0.02
        save_png(gt_dir / f"image_{image_id}_mask.png", BinaryMask(gt))
        save_png(pred_dir / f"image_{image_id}.png", BinaryMask(pred))
        photo = np.full((48, 64, 3), 210, dtype=np.uint8)
        photo[gt] = 35
        save_png(img_dir / f"image_{image_id}.png", RgbImage(photo))
    return pred_dir, gt_dir, img_dir


def _records_file(path, method, shift):
    records = []
    for index, image_id in enumerate(TEST_IDS):
        f1 = 0.5 + 0.02 * index + shift
        records.append(
            MetricRecord(
                image_id=image_id,
                method=method,
                seed=42,
                f1=f1,
                iou=f1 / (2 - f1),
                bf1=f1,
                b_iou=f1,
                precision=f1,
                recall=f1,
                tp=1,
                fp=0,
                fn=0,
                tau=1,
                band_width=1,
                eval_resolution=(64, 48),
            ).to_dict()
        )
    write_json(path, {"records": records})
    return path


def test_evaluate_writes_one_record_per_pair(tmp_path, capsys):
    pred_dir, gt_dir, _ = _dataset(tmp_path)
    out = tmp_path / "scores.json"
    overlays = tmp_path / "ov"

    code = main(
        ["evaluate", str(pred_dir), str(gt_dir), "--seed", "42", "--out", str(out), "--overlay-dir", str(overlays)]
    )

    report = json.loads(out.read_text(encoding="utf-8"))
    assert code == 0
    assert len(report["records"]) == 12
    assert [r["image_id"] for r in report["records"]] == sorted(TEST_IDS, key=image_sort_key)
    assert report["metadata"]["band_variant"] == "both"
    assert (overlays / "image_3_overlay.png").exists()
    assert "Per-image scores" in capsys.readouterr().out


def test_evaluate_output_does_not_depend_on_threads(tmp_path):
    pred_dir, gt_dir, _ = _dataset(tmp_path)
    serial, threaded = tmp_path / "serial.json", tmp_path / "threaded.json"

    assert main(["--threads", "1", "evaluate", str(pred_dir), str(gt_dir), "--out", str(serial)]) == 0
    assert main(["--threads", "8", "evaluate", str(pred_dir), str(gt_dir), "--out", str(threaded)]) == 0

    assert serial.read_bytes() == threaded.read_bytes()


def test_unpaired_file_is_a_data_error(tmp_path):
    pred_dir, gt_dir, _ = _dataset(tmp_path)
    (gt_dir / "image_3_mask.png").unlink()

    assert main(["evaluate", str(pred_dir), str(gt_dir), "--out", str(tmp_path / "o.json")]) == 2
    assert not (tmp_path / "o.json").exists()


def test_empty_directories_are_a_data_error(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()

    assert main(["evaluate", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(tmp_path / "o.json")]) == 2


def test_usage_errors_exit_one(tmp_path):
    _, gt_dir, img_dir = _dataset(tmp_path)
    out = str(tmp_path / "o.json")

    assert main(["baseline", str(img_dir), str(gt_dir), "--method", "adaptive", "--block", "50", "--out", out]) == 1
    assert main(["baseline", str(img_dir), str(gt_dir), "--method", "median", "--out", out]) == 1
    assert main(["--threads", "-2", "characterize", str(gt_dir)]) == 1


def test_baseline_records_are_deterministic(tmp_path):
    _, gt_dir, img_dir = _dataset(tmp_path)
    out = tmp_path / "otsu.json"
    argv = ["baseline", str(img_dir), str(gt_dir), "--method", "otsu", "--out", str(out)]

    assert main(argv + ["--masks-dir", str(tmp_path / "m")]) == 0

    report = json.loads(out.read_text(encoding="utf-8"))
    assert {r["seed"] for r in report["records"]} == {None}
    assert report["metadata"]["baseline"] == "otsu"
    assert min(r["f1"] for r in report["records"]) > 0.9
    assert (tmp_path / "m" / "image_36_mask.png").exists()


def test_compare_constant_shift_is_significant(tmp_path):
    a = _records_file(tmp_path / "a.json", "tversky", 0.2)
    b = _records_file(tmp_path / "b.json", "ce", 0.0)
    out = tmp_path / "cmp.json"

    assert main(["compare", str(a), str(b), "--out", str(out)]) == 0

    result = json.loads(out.read_text(encoding="utf-8"))["comparison"]
    assert result["p"] == pytest.approx(2 / 4096, abs=1e-6)
    assert result["significant"] is True
    assert result["mean_delta"] == pytest.approx(0.2)


def test_compare_identical_reports(tmp_path):
    a = _records_file(tmp_path / "a.json", "ce", 0.0)
    out = tmp_path / "cmp.json"

    assert main(["compare", str(a), str(a), "--out", str(out)]) == 0

    result = json.loads(out.read_text(encoding="utf-8"))["comparison"]
    assert result["p"] == 1.0
    assert result["significant"] is False


def test_compare_mismatched_image_sets(tmp_path):
    a = _records_file(tmp_path / "a.json", "ce", 0.0)
    data = json.loads(a.read_text(encoding="utf-8"))
    data["records"] = data["records"][:-1]
    b = tmp_path / "b.json"
    b.write_text(json.dumps(data), encoding="utf-8")

    assert main(["compare", str(a), str(b)]) == 2


def test_report_single_method_has_no_pairwise_rows(tmp_path, capsys):
    records = _records_file(tmp_path / "a.json", "ce", 0.0)
    out = tmp_path / "report.json"

    assert main(["report", str(records), "--out", str(out)]) == 0

    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["tables"]["pairwise"] == []
    assert report["manifest"]["seeds"] == [42]
    assert "Pairwise" not in capsys.readouterr().out


def test_report_two_methods(tmp_path, capsys):
    a = _records_file(tmp_path / "a.json", "ce", 0.0)
    b = _records_file(tmp_path / "b.json", "tversky", 0.1)

    assert main(["report", str(a), str(b), "--reference", "ce"]) == 0

    text = capsys.readouterr().out
    assert "Pairwise Wilcoxon" in text
    assert "tversky" in text


def test_characterize_marks_empty_masks(tmp_path, capsys):
    masks = tmp_path / "masks"
    save_png(masks / "image_3_mask.png", BinaryMask(_gt(0)))
    save_png(masks / "image_22_mask.png", BinaryMask(np.zeros((48, 64), dtype=bool)))
    out = tmp_path / "stats.json"

    assert main(["characterize", str(masks), "--json", str(out)]) == 0

    assert "undefined width" in capsys.readouterr().out
    stats = json.loads(out.read_text(encoding="utf-8"))
    assert [row["image_id"] for row in stats["images"]] == ["3", "22"]


def test_augment_writes_variants(tmp_path):
    _, gt_dir, img_dir = _dataset(tmp_path)
    out = tmp_path / "aug"

    assert main(["augment", str(img_dir), str(gt_dir), str(out), "--variants", "2", "--skip-test-ids"]) == 0
    assert not out.exists() or not any(out.iterdir())

    assert main(["augment", str(img_dir), str(gt_dir), str(out), "--variants", "2"]) == 0
    assert (out / "image_3_aug1.png").exists()
    assert (out / "image_36_aug0_mask.png").exists()
    assert len(list(out.glob("*.json"))) == 24


def test_loss_check_passes(tmp_path, capsys):
    assert main(["loss-check", "--trials", "3", "--size", "4"]) == 0
    assert "tversky(0.5,0.5) = dice" in capsys.readouterr().out


def test_help_exits_zero():
    assert main(["--help"]) == 0
