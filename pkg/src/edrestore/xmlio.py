"""Digital description export (XML) and detection/annotation JSON I/O.

The XML schema is versioned with ``schema="1"``: a ``<drawing>`` element
carrying name, restored dimensions and scale factor, with one ``<symbol>``
child per detection. Detection JSON files are lists of
``{class, x, y, w, h, score}`` objects in global-frame pixels (``score``
optional for ground-truth annotations).
"""
from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .config import SYMBOL_CLASSES
from .errors import ParseError, SchemaError
from .pipeline import FRAME_GLOBAL, Detection

SCHEMA_VERSION = "1"


def _xml_representable(text: str) -> bool:
    # XML 1.0 forbids most control characters even when escaped.
    return all(
        ch in "\t\n\r" or 0x20 <= ord(ch) <= 0xD7FF or 0xE000 <= ord(ch) <= 0x10FFFF
        for ch in text
    )


@dataclass
class DrawingDescription:
    """Everything needed to describe one recognized drawing."""

    name: str
    width: int
    height: int
    scale: int
    symbols: list[Detection] = field(default_factory=list)

    def validate(self, classes: tuple[str, ...] = SYMBOL_CLASSES) -> None:
        if self.width < 1 or self.height < 1 or self.scale < 1:
            raise SchemaError(f"invalid drawing geometry: {self.width}x{self.height}@{self.scale}")
        if not _xml_representable(self.name):
            raise SchemaError("drawing name contains characters XML cannot carry")
        for sym in self.symbols:
            if sym.class_label not in classes:
                raise SchemaError(
                    f"symbol class {sym.class_label!r} is not in the configured class set"
                )
            if sym.x < 0 or sym.y < 0 or sym.x + sym.w > self.width or sym.y + sym.h > self.height:
                raise SchemaError(f"symbol box {sym.box} exceeds {self.width}x{self.height}")


def export_xml(desc: DrawingDescription, classes: tuple[str, ...] = SYMBOL_CLASSES) -> str:
    """Serialize a description to UTF-8 XML text (scores at 4 decimals)."""
    desc.validate(classes)
    root = ET.Element("drawing")
    root.set("schema", SCHEMA_VERSION)
    root.set("name", desc.name)
    root.set("width", str(desc.width))
    root.set("height", str(desc.height))
    root.set("scale", str(desc.scale))
    for sym in desc.symbols:
        el = ET.SubElement(root, "symbol")
        el.set("class", sym.class_label)
        el.set("x", str(sym.x))
        el.set("y", str(sym.y))
        el.set("w", str(sym.w))
        el.set("h", str(sym.h))
        el.set("score", f"{sym.score:.4f}")
    return ET.tostring(root, encoding="unicode", xml_declaration=True)


def write_xml(path: str | Path, desc: DrawingDescription,
              classes: tuple[str, ...] = SYMBOL_CLASSES) -> None:
    Path(path).write_text(export_xml(desc, classes), encoding="utf-8")


def parse_xml(text: str) -> DrawingDescription:
    """Parse a description document back into its in-memory form."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"invalid XML: {exc}") from exc
    if root.tag != "drawing":
        raise ParseError(f"expected <drawing> root element, got <{root.tag}>")
    if root.get("schema") != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema version {root.get('schema')!r}")
    try:
        desc = DrawingDescription(
            name=root.get("name", ""),
            width=int(root.get("width", "0")),
            height=int(root.get("height", "0")),
            scale=int(root.get("scale", "0")),
        )
        for el in root:
            if el.tag != "symbol":
                raise ParseError(f"unexpected element <{el.tag}> in drawing")
            desc.symbols.append(
                Detection(
                    class_label=el.get("class", ""),
                    x=int(el.get("x", "")),
                    y=int(el.get("y", "")),
                    w=int(el.get("w", "")),
                    h=int(el.get("h", "")),
                    score=float(el.get("score", "")),
                    frame=FRAME_GLOBAL,
                )
            )
    except ValueError as exc:
        raise ParseError(f"malformed attribute value: {exc}") from exc
    return desc


def read_xml(path: str | Path) -> DrawingDescription:
    return parse_xml(Path(path).read_text(encoding="utf-8"))


def save_detections(path: str | Path, dets: list[Detection]) -> None:
    """Write global-frame detections as a JSON list."""
    doc = [
        {"class": d.class_label, "x": d.x, "y": d.y, "w": d.w, "h": d.h, "score": d.score}
        for d in dets
    ]
    Path(path).write_text(json.dumps(doc, indent=2), encoding="utf-8")


def _parse_entry(entry: dict, index: int, require_score: bool) -> Detection:
    if not isinstance(entry, dict):
        raise ParseError(f"entry {index}: expected an object, got {type(entry).__name__}")
    for key in ("class", "x", "y", "w", "h"):
        if key not in entry:
            raise ParseError(f"entry {index}: missing field {key!r}")
    try:
        x, y = int(entry["x"]), int(entry["y"])
        w, h = int(entry["w"]), int(entry["h"])
        score = float(entry.get("score", 1.0))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"entry {index}: non-numeric field: {exc}") from exc
    if require_score and "score" not in entry:
        raise ParseError(f"entry {index}: missing field 'score'")
    if w < 1:
        raise ParseError(f"entry {index}: field 'w' must be >= 1, got {w}")
    if h < 1:
        raise ParseError(f"entry {index}: field 'h' must be >= 1, got {h}")
    if x < 0 or y < 0:
        raise ParseError(f"entry {index}: fields 'x'/'y' must be non-negative")
    if not 0.0 <= score <= 1.0:
        raise ParseError(f"entry {index}: field 'score' must be in [0, 1], got {score}")
    return Detection(
        class_label=str(entry["class"]), x=x, y=y, w=w, h=h, score=score, frame=FRAME_GLOBAL
    )


def load_annotations(path: str | Path) -> list[Detection]:
    """Read a ground-truth/prediction JSON file into global-frame detections.

    Scores are optional (default 1.0); malformed entries raise ``ParseError``
    naming the failing entry and field.
    """
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise ParseError(f"annotation file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise ParseError(f"{path}: expected a JSON list of detections")
    return [_parse_entry(entry, i, require_score=False) for i, entry in enumerate(doc)]
