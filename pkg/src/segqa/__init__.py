"""Reference-free segmentation quality scoring via a promptable segmenter.

A prediction is decomposed into per-class objects; each object's center
point and bounding box are fed to a promptable segmenter, and the Dice
agreement between the object and the segmenter's answers is averaged into a
sample-level quality score that tracks true segmentation quality.
"""

from .backend import (
    BackendConfig,
    EchoBackend,
    EmptyBackend,
    FileBackend,
    PromptBackend,
    PromptResult,
    QueryContext,
    ReferenceBackend,
    RemoteBackend,
    build_backend,
    replace_prediction,
)
from .evaluation import (
    EvaluationReport,
    PairedSeries,
    bottom_k_accuracy,
    evaluate,
    pearson,
    replacement_analysis,
    spearman,
    true_dice,
)
from .objects import BoxPrompt, ObjectInstance, PointPrompt, connected_components, derive_prompts, extract_objects
from .raster import (
    Image,
    ProbabilityMap,
    SegmentationMap,
    import_labelmap,
    load_image,
    load_mask,
    load_probability,
    load_segmentation,
    save_image,
    save_mask,
    save_probability,
    save_segmentation,
)
from .scoring import ObjectScore, SampleScore, confidence_baseline, dice, iou, score_sample
from .synth import DegradationSpec, SceneSpec, build_corpus, degrade, generate_scene

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "BoxPrompt",
    "DegradationSpec",
    "EchoBackend",
    "EmptyBackend",
    "EvaluationReport",
    "FileBackend",
    "Image",
    "ObjectInstance",
    "ObjectScore",
    "PairedSeries",
    "PointPrompt",
    "ProbabilityMap",
    "PromptBackend",
    "PromptResult",
    "QueryContext",
    "ReferenceBackend",
    "RemoteBackend",
    "SampleScore",
    "SceneSpec",
    "SegmentationMap",
    "bottom_k_accuracy",
    "build_backend",
    "build_corpus",
    "confidence_baseline",
    "connected_components",
    "degrade",
    "derive_prompts",
    "dice",
    "evaluate",
    "extract_objects",
    "generate_scene",
    "import_labelmap",
    "iou",
    "load_image",
    "load_mask",
    "load_probability",
    "load_segmentation",
    "pearson",
    "replace_prediction",
    "replacement_analysis",
    "save_image",
    "save_mask",
    "save_probability",
    "save_segmentation",
    "score_sample",
    "spearman",
    "true_dice",
]
