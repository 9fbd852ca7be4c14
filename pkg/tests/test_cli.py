"""Command-line behavior: commands, exit codes, determinism."""
from __future__ import annotations

import json

import pytest

from conftest import ORACLE_DETECTOR_BODY, make_annotated_drawing, make_line_art, write_stub

from edrestore.cli import main
from edrestore.raster import load_gray, save_png
from edrestore.xmlio import read_xml


@pytest.fixture
def drawing_png(tmp_path):
    img, truths = make_annotated_drawing(
        300, 300, [("DCR", 30, 30, 44), ("GEN", 180, 200, 52)]
    )
    path = tmp_path / "drawing.png"
    save_png(path, img)
    gt = tmp_path / "gt.json"
    gt.write_text(json.dumps(truths))
    return path, gt, truths


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(
        json.dumps(
            {
                "pipeline": {
                    "restore_patch_size": 50,
                    "restore_overlap": 10,
                    "scale": 1,
                    "detect_patch_size": 200,
                    "detect_overlap": 100,
                    "margin": 300,
                }
            }
        )
    )
    return path


def test_config_dump_defaults(capsys):
    assert main(["config", "--dump-defaults"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["pipeline"]["restore_patch_size"] == 200


def test_usage_error_exit_code(capsys):
    assert main(["restore"]) == 2  # missing required args
    assert main(["no-such-command"]) == 2


def test_missing_input_exit_code(tmp_path, capsys):
    assert main(["triage", "--input", str(tmp_path / "none.png")]) == 3


def test_bad_config_exit_code(tmp_path, drawing_png):
    path, _, _ = drawing_png
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"pipeline": {"iou_thresh": 3}}))
    assert main(["--config", str(cfg), "triage", "--input", str(path)]) == 3


def test_triage_report_and_overlay(tmp_path, drawing_png, small_config, capsys):
    path, _, _ = drawing_png
    report = tmp_path / "triage.json"
    overlay = tmp_path / "overlay.png"
    code = main(
        [
            "--config",
            str(small_config),
            "triage",
            "--input",
            str(path),
            "--report",
            str(report),
            "--overlay",
            str(overlay),
        ]
    )
    assert code == 0
    doc = json.loads(report.read_text())
    assert set(doc["stp_ids"]) | set(doc["ctp_ids"]) == set(range(len(doc["origins"])))
    assert overlay.exists()
    rgb = load_gray(overlay)
    assert rgb.shape[0] > 0


def test_restore_detect_eval_flow(tmp_path, drawing_png, small_config):
    path, gt, _ = drawing_png
    restored = tmp_path / "restored.png"
    assert (
        main(
            [
                "--config",
                str(small_config),
                "restore",
                "--input",
                str(path),
                "--output",
                str(restored),
                "--restorer",
                "identity-bicubic",
                "--report",
                str(tmp_path / "report.json"),
            ]
        )
        == 0
    )
    assert restored.exists()
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["total_patches"] == report["stp_count"] + report["ctp_count"]

    detector = write_stub(tmp_path / "det.py", ORACLE_DETECTOR_BODY)
    dets_path = tmp_path / "dets.json"
    code = main(
        [
            "--config",
            str(small_config),
            "detect",
            "--input",
            str(restored),
            "--detector",
            f"{detector}",
            "--output",
            str(dets_path),
        ]
    )
    # the oracle stub exits nonzero without its --truth argument; the full
    # detector flow is covered by test_run_end_to_end_and_eval
    assert code == 4


def test_run_end_to_end_and_eval(tmp_path, drawing_png, small_config, capsys):
    path, gt, truths = drawing_png
    detector = write_stub(tmp_path / "det.py", ORACLE_DETECTOR_BODY)
    out_dir = tmp_path / "out"
    code = main(
        [
            "--config",
            str(small_config),
            "run",
            "--input",
            str(path),
            "--output-dir",
            str(out_dir),
            "--restorer",
            "identity-bicubic",
            "--detector",
            str(detector),
        ]
    )
    # detector stub requires --truth argument; rebuild spec with extra args via config?
    assert code == 4

    # wrap the oracle detector with its truth path baked in
    wrapped = write_stub(
        tmp_path / "det_wrapped.py",
        f"""
        import subprocess, sys
        sys.exit(subprocess.call(
            [sys.executable, {str(detector)!r}, *sys.argv[1:], "--truth", {str(gt)!r}]))
        """,
    )
    code = main(
        [
            "--config",
            str(small_config),
            "run",
            "--input",
            str(path),
            "--output-dir",
            str(out_dir),
            "--restorer",
            "identity-bicubic",
            "--detector",
            str(wrapped),
        ]
    )
    assert code == 0
    assert (out_dir / "restored.png").exists()
    dets = json.loads((out_dir / "detections.json").read_text())
    assert sorted((d["class"], d["x"], d["y"]) for d in dets) == sorted(
        (t["class"], t["x"], t["y"]) for t in truths
    )
    desc = read_xml(out_dir / "description.xml")
    assert len(desc.symbols) == len(truths)

    scores = tmp_path / "scores.json"
    code = main(
        [
            "eval",
            "--pred",
            str(out_dir / "detections.json"),
            "--gt",
            str(gt),
            "--iou",
            "0.9",
            "--output",
            str(scores),
        ]
    )
    assert code == 0
    doc = json.loads(scores.read_text())
    assert doc["micro"]["precision"] == 1.0
    assert doc["micro"]["recall"] == 1.0


def test_degrade_command_determinism(tmp_path):
    hq_dir = tmp_path / "hq"
    hq_dir.mkdir()
    save_png(hq_dir / "a.png", make_line_art(128, 128, seed=1))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"degrade": {"max_orders": 2}}))
    for out in ("d1", "d2"):
        code = main(
            [
                "--config",
                str(cfg),
                "--seed",
                "5",
                "degrade",
                "--hq-dir",
                str(hq_dir),
                "--out-dir",
                str(tmp_path / out),
                "--count",
                "2",
            ]
        )
        assert code == 0
    for name in ("manifest.json",):
        assert (tmp_path / "d1" / name).read_bytes() == (tmp_path / "d2" / name).read_bytes()
    lq1 = sorted((tmp_path / "d1" / "lq").glob("*.png"))
    assert len(lq1) == 2
    for p in lq1:
        assert p.read_bytes() == (tmp_path / "d2" / "lq" / p.name).read_bytes()


def test_export_xml_command(tmp_path, capsys):
    dets = tmp_path / "dets.json"
    dets.write_text(
        json.dumps([{"class": "BKR", "x": 10, "y": 20, "w": 30, "h": 40, "score": 0.9876}])
    )
    out = tmp_path / "desc.xml"
    code = main(
        [
            "export-xml",
            "--detections",
            str(dets),
            "--name",
            "sheet1",
            "--width",
            "500",
            "--height",
            "400",
            "--scale",
            "4",
            "--output",
            str(out),
        ]
    )
    assert code == 0
    desc = read_xml(out)
    assert desc.name == "sheet1" and desc.scale == 4
    assert desc.symbols[0].box == (10, 20, 30, 40)


def test_export_xml_bad_class_is_input_error(tmp_path):
    dets = tmp_path / "dets.json"
    dets.write_text(json.dumps([{"class": "ZZZ", "x": 1, "y": 1, "w": 2, "h": 2}]))
    code = main(
        [
            "export-xml",
            "--detections",
            str(dets),
            "--name",
            "x",
            "--width",
            "10",
            "--height",
            "10",
            "--output",
            str(tmp_path / "o.xml"),
        ]
    )
    assert code == 3
