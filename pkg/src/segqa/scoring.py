"""Agreement scoring: Dice/IoU, the per-object score, and the sample score.

For each predicted object m the backend is asked twice, once with the
object's center point and once with its bounding box. The object score is
tau(m, point_mask) + tau(m, box_mask) with tau = Dice by default, and the
sample score is the flat mean of object scores over all classes, so it lives
in [0, 2]. A prediction with no objects scores 0 with the no_objects flag
set; prompts are derived from the prediction, so missed objects are
invisible to this score by construction.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .backend import PromptBackend, QueryContext
from .errors import ContractViolation
from .objects import extract_objects
from .raster import Image, ProbabilityMap, SegmentationMap


def _counts(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, np.bool_)
    b = np.asarray(b, np.bool_)
    if a.shape != b.shape:
        raise ContractViolation(f"mask dimensions differ: {a.shape} vs {b.shape}")
    return np.count_nonzero(a), np.count_nonzero(b), np.count_nonzero(a & b)


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice coefficient 2|a&b| / (|a| + |b|); 1.0 when both masks are empty."""
    na, nb, inter = _counts(a, b)
    if na == 0 and nb == 0:
        return 1.0
    return 2.0 * inter / (na + nb)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    na, nb, inter = _counts(a, b)
    if na == 0 and nb == 0:
        return 1.0
    return inter / (na + nb - inter)


METRICS = {"dice": dice, "iou": iou}


@dataclass(frozen=True)
class ObjectScore:
    class_index: int
    object_index: int
    point_dice: float
    box_dice: float
    score: float  # point_dice + box_dice, in [0, 2]


@dataclass(frozen=True)
class SampleScore:
    sample_id: str
    object_scores: Tuple[ObjectScore, ...]
    score: float  # mean object score, in [0, 2]; 0.0 when no objects
    num_objects: int
    no_objects: bool


def score_sample(
    image: Image,
    prediction: SegmentationMap,
    backend: PromptBackend,
    *,
    sample_id: str = "",
    connectivity: int = 8,
    min_area: int = 1,
    metric: str = "dice",
) -> SampleScore:
    """Score one prediction by its agreement with the promptable segmenter.

    Backend failures abort the sample (the exception propagates; no partial
    score is emitted). Output object order is deterministic regardless of
    how the backend is scheduled.
    """
    if (prediction.height, prediction.width) != (image.height, image.width):
        raise ContractViolation(
            f"prediction {prediction.width}x{prediction.height} does not match "
            f"image {image.width}x{image.height}"
        )
    try:
        tau = METRICS[metric]
    except KeyError:
        raise ContractViolation(f"unknown metric {metric!r}; expected one of {sorted(METRICS)}") from None

    objects = extract_objects(prediction, connectivity=connectivity, min_area=min_area)
    if not objects:
        return SampleScore(sample_id=sample_id, object_scores=(), score=0.0, num_objects=0, no_objects=True)

    scores = []
    for obj in objects:
        ctx = QueryContext(sample_id=sample_id, class_index=obj.class_index, object_index=obj.object_index)
        point_mask = backend.segment_point(image, obj.point, ctx).mask
        box_mask = backend.segment_box(image, obj.box, ctx).mask
        pd = tau(obj.mask, point_mask)
        bd = tau(obj.mask, box_mask)
        scores.append(
            ObjectScore(
                class_index=obj.class_index,
                object_index=obj.object_index,
                point_dice=pd,
                box_dice=bd,
                score=pd + bd,
            )
        )
    total = sum(s.score for s in scores)
    return SampleScore(
        sample_id=sample_id,
        object_scores=tuple(scores),
        score=total / len(scores),
        num_objects=len(scores),
        no_objects=False,
    )


def confidence_baseline(probability: ProbabilityMap) -> float:
    """Mean over all pixels of the per-pixel maximum class probability."""
    return float(probability.data.max(axis=0).mean())
