"""Toolkit configuration: one JSON document with a section per subsystem.

Defaults live in the dataclasses; a config file only needs the keys it
overrides. ``dump_defaults`` emits the complete default document.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .degrade import DegradeConfig
from .errors import ConfigError
from .stp import StpParams
from .texture import DEFAULT_LEVELS, DEFAULT_OFFSETS, DEFAULT_WEIGHTS

SYMBOL_CLASSES = ("DCR", "BKR", "GLD", "TFM", "IND", "CAP", "GEN", "GND")


@dataclass(frozen=True)
class TextureConfig:
    levels: int = DEFAULT_LEVELS
    offsets: tuple[tuple[int, int], ...] = DEFAULT_OFFSETS
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS

    def validate(self) -> None:
        if self.levels < 2:
            raise ConfigError(f"texture levels must be >= 2, got {self.levels}")
        if not self.offsets or any(tuple(o) == (0, 0) for o in self.offsets):
            raise ConfigError("offsets must be non-empty and non-zero")
        if len(self.weights) != 4:
            raise ConfigError("exactly four feature weights are required")


@dataclass(frozen=True)
class TriageConfig:
    max_iter: int = 100

    def validate(self) -> None:
        if self.max_iter < 1:
            raise ConfigError(f"triage max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class PipelineConfig:
    restore_patch_size: int = 200
    restore_overlap: int = 50
    scale: int = 4
    detect_patch_size: int = 1000
    detect_overlap: int = 200
    iou_thresh: float = 0.9
    classes: tuple[str, ...] = SYMBOL_CLASSES
    triage_mode: str = "categorized"
    seed: int = 0
    margin: int = 8
    canny_low: int = 50
    canny_high: int = 150
    central_denoise: bool = False
    central_binarize: bool = False
    central_sharpen: bool = False
    plugin_timeout: float = 300.0

    def validate(self) -> None:
        for name in ("restore_patch_size", "detect_patch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 <= self.restore_overlap < self.restore_patch_size:
            raise ConfigError("restore_overlap must satisfy 0 <= p < patch size")
        if not 0 <= self.detect_overlap < self.detect_patch_size:
            raise ConfigError("detect_overlap must satisfy 0 <= p < patch size")
        if self.scale < 1:
            raise ConfigError(f"scale must be >= 1, got {self.scale}")
        if not 0 < self.iou_thresh <= 1:
            raise ConfigError(f"iou_thresh must be in (0, 1], got {self.iou_thresh}")
        if self.triage_mode not in ("categorized", "direct"):
            raise ConfigError(f"triage_mode must be categorized or direct, got {self.triage_mode!r}")
        if self.margin < 0:
            raise ConfigError("margin must be non-negative")
        if not 0 < self.canny_low <= self.canny_high:
            raise ConfigError("canny thresholds must satisfy 0 < low <= high")
        if not self.classes:
            raise ConfigError("class set cannot be empty")
        if self.plugin_timeout <= 0:
            raise ConfigError("plugin_timeout must be positive")


@dataclass
class ToolkitConfig:
    texture: TextureConfig = field(default_factory=TextureConfig)
    triage: TriageConfig = field(default_factory=TriageConfig)
    stp: StpParams = field(default_factory=StpParams)
    degrade: DegradeConfig = field(default_factory=DegradeConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def validate(self) -> None:
        self.texture.validate()
        self.triage.validate()
        self.stp.validate()
        self.degrade.validate()
        self.pipeline.validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = ("texture", "triage", "stp", "degrade", "pipeline")

# Tuple-typed fields that arrive as JSON lists and need re-tupling.
_TUPLE_FIELDS = {
    ("texture", "offsets"): lambda v: tuple(tuple(int(x) for x in o) for o in v),
    ("texture", "weights"): lambda v: tuple(float(x) for x in v),
    ("pipeline", "classes"): lambda v: tuple(str(x) for x in v),
    ("degrade", "blur_sigma"): tuple,
    ("degrade", "kernel_sizes"): tuple,
    ("degrade", "first_ratios"): tuple,
    ("degrade", "extra_ratios"): tuple,
    ("degrade", "noise_sigma"): tuple,
    ("degrade", "poisson_scale"): tuple,
    ("degrade", "jpeg_quality"): tuple,
    ("degrade", "sinc_cutoff"): tuple,
}


def config_from_dict(doc: dict) -> ToolkitConfig:
    """Merge a (possibly partial) config document onto the defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = ToolkitConfig()
    for section in _SECTIONS:
        if section not in doc:
            continue
        entries = doc[section]
        if not isinstance(entries, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        current = getattr(cfg, section)
        valid = {f.name for f in dataclasses.fields(current)}
        bad = set(entries) - valid
        if bad:
            raise ConfigError(f"unknown keys in section {section!r}: {sorted(bad)}")
        coerced = {}
        for key, value in entries.items():
            fixer = _TUPLE_FIELDS.get((section, key))
            coerced[key] = fixer(value) if fixer else value
        setattr(cfg, section, dataclasses.replace(current, **coerced))
    cfg.validate()
    return cfg


def load_config(path: str | Path | None) -> ToolkitConfig:
    """Load a JSON config file, or the defaults when ``path`` is None."""
    if path is None:
        cfg = ToolkitConfig()
        cfg.validate()
        return cfg
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    return config_from_dict(doc)


def dump_defaults() -> str:
    """The complete default configuration as a JSON document."""
    return json.dumps(ToolkitConfig().to_dict(), indent=2, sort_keys=False)
