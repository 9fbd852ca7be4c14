"""Shared fixtures: synthetic drawings, line-art patches, plug-in stubs."""
from __future__ import annotations

import stat
import textwrap
from pathlib import Path

import numpy as np
import pytest


def draw_symbol(canvas: np.ndarray, x: int, y: int, size: int) -> None:
    """Draw a dense box-with-cross symbol; enough texture to read as complex."""
    canvas[y : y + size, x : x + size] = 255
    canvas[y, x : x + size] = 0
    canvas[y + size - 1, x : x + size] = 0
    canvas[y : y + size, x] = 0
    canvas[y : y + size, x + size - 1] = 0
    for d in range(size):
        canvas[y + d, x + d] = 0
        canvas[y + d, x + size - 1 - d] = 0
    mid = size // 2
    canvas[y + mid, x : x + size] = 0
    canvas[y : y + size, x + mid] = 0


def make_line_art(height: int = 256, width: int = 256, seed: int = 5) -> np.ndarray:
    """White canvas with strokes, boxes and hatching, in the style of a
    scanned diagram."""
    rng = np.random.default_rng(seed)
    img = np.full((height, width), 255, np.uint8)
    for _ in range(6):
        y = int(rng.integers(4, height - 4))
        x0, x1 = sorted(rng.integers(2, width - 2, 2).tolist())
        img[y, x0 : x1 + 1] = 0
    for _ in range(6):
        x = int(rng.integers(4, width - 4))
        y0, y1 = sorted(rng.integers(2, height - 2, 2).tolist())
        img[y0 : y1 + 1, x] = 0
    for _ in range(3):
        s = int(rng.integers(16, 40))
        x = int(rng.integers(2, width - s - 2))
        y = int(rng.integers(2, height - s - 2))
        draw_symbol(img, x, y, s)
    return img


@pytest.fixture
def line_art() -> np.ndarray:
    return make_line_art()


def make_annotated_drawing(
    height: int, width: int, symbol_specs: list[tuple[str, int, int, int]]
) -> tuple[np.ndarray, list[dict]]:
    """A drawing plus ground-truth boxes: (class, x, y, size) per symbol."""
    img = np.full((height, width), 255, np.uint8)
    truths = []
    for cls, x, y, size in symbol_specs:
        draw_symbol(img, x, y, size)
        truths.append({"class": cls, "x": x, "y": y, "w": size, "h": size})
    return img, truths


def write_stub(path: Path, body: str) -> Path:
    """Write an executable python plug-in stub."""
    text = "#!/usr/bin/env python3\n" + textwrap.dedent(body)
    path.write_text(text, encoding="utf-8")
    path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return path


BICUBIC_RESTORER_BODY = """
import argparse, json, pathlib
import cv2

parser = argparse.ArgumentParser()
parser.add_argument("--input-dir", required=True)
parser.add_argument("--output-dir", required=True)
parser.add_argument("--scale", type=int, required=True)
parser.add_argument("--kind", required=True)
parser.add_argument("--sleep-ms", type=float, default=0.0)
args = parser.parse_args()

import time
in_dir = pathlib.Path(args.input_dir)
out_dir = pathlib.Path(args.output_dir)
manifest = json.loads((in_dir / "manifest.json").read_text())
for row, col in manifest["origins"]:
    name = f"patch_{row}_{col}.png"
    img = cv2.imread(str(in_dir / name), cv2.IMREAD_GRAYSCALE)
    if args.sleep_ms > 0:
        time.sleep(args.sleep_ms / 1000.0)
    up = cv2.resize(
        img,
        (img.shape[1] * args.scale, img.shape[0] * args.scale),
        interpolation=cv2.INTER_CUBIC,
    )
    cv2.imwrite(str(out_dir / name), up)
"""

ORACLE_DETECTOR_BODY = """
import argparse, json, pathlib

parser = argparse.ArgumentParser()
parser.add_argument("--input-dir", required=True)
parser.add_argument("--output-dir", required=True)
parser.add_argument("--scale", type=int, required=True)
parser.add_argument("--kind", required=True)
parser.add_argument("--truth", required=True)
args = parser.parse_args()

in_dir = pathlib.Path(args.input_dir)
manifest = json.loads((in_dir / "manifest.json").read_text())
truth = json.loads(pathlib.Path(args.truth).read_text())
w = manifest["patch_size"]
out = []
for row, col in manifest["origins"]:
    for t in truth:
        lx, ly = t["x"] - col, t["y"] - row
        if lx >= 0 and ly >= 0 and lx + t["w"] <= w and ly + t["h"] <= w:
            out.append({
                "patch": f"{row}_{col}",
                "class": t["class"],
                "x": lx, "y": ly, "w": t["w"], "h": t["h"],
                "score": t.get("score", 0.99),
            })
(pathlib.Path(args.output_dir) / "detections.json").write_text(json.dumps(out))
"""

FAILING_STUB_BODY = """
import sys
sys.stderr.write("stub diagnostic: deliberate failure\\n")
sys.exit(7)
"""


@pytest.fixture
def bicubic_restorer_stub(tmp_path):
    return write_stub(tmp_path / "restorer_stub.py", BICUBIC_RESTORER_BODY)


@pytest.fixture
def oracle_detector_stub(tmp_path):
    return write_stub(tmp_path / "detector_stub.py", ORACLE_DETECTOR_BODY)


@pytest.fixture
def failing_stub(tmp_path):
    return write_stub(tmp_path / "failing_stub.py", FAILING_STUB_BODY)
