"""Toolkit for restoring low-quality engineering drawings and recognizing
their graphical symbols: patch triage by texture, heuristic and pluggable
restoration, synthetic degradation for training data, and evaluation.
"""

from .config import SYMBOL_CLASSES, ToolkitConfig, load_config
from .degrade import (
    DegradationRecipe,
    DegradationStage,
    DegradeConfig,
    degrade,
    generate_pairs,
    sample_recipe,
)
from .evaluate import image_metrics, iou, match_and_score, ssim
from .pipeline import (
    Detection,
    PipelineReport,
    PluginSpec,
    dedup_global,
    detect_symbols,
    restore_drawing,
    run_end_to_end,
)
from .raster import (
    CropRect,
    PatchGrid,
    binarize,
    extract_central_part,
    load_gray,
    merge_patches,
    save_png,
    slice_patches,
    to_grayscale,
)
from .stp import StpParams, StpStep, restore_stp, stp_step
from .texture import GlcmFeatures, GlcmMatrix, compute_glcm, glcm_features, normalize_glcm
from .triage import TriageResult, assign_cluster_labels, classify_patches
from .xmlio import DrawingDescription, export_xml, load_annotations, parse_xml

__version__ = "0.1.0"

__all__ = [
    "SYMBOL_CLASSES",
    "ToolkitConfig",
    "load_config",
    "DegradationRecipe",
    "DegradationStage",
    "DegradeConfig",
    "degrade",
    "generate_pairs",
    "sample_recipe",
    "image_metrics",
    "iou",
    "match_and_score",
    "ssim",
    "Detection",
    "PipelineReport",
    "PluginSpec",
    "dedup_global",
    "detect_symbols",
    "restore_drawing",
    "run_end_to_end",
    "CropRect",
    "PatchGrid",
    "binarize",
    "extract_central_part",
    "load_gray",
    "merge_patches",
    "save_png",
    "slice_patches",
    "to_grayscale",
    "StpParams",
    "StpStep",
    "restore_stp",
    "stp_step",
    "GlcmFeatures",
    "GlcmMatrix",
    "compute_glcm",
    "glcm_features",
    "normalize_glcm",
    "TriageResult",
    "assign_cluster_labels",
    "classify_patches",
    "DrawingDescription",
    "export_xml",
    "load_annotations",
    "parse_xml",
]
