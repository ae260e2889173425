"""Evaluation of assessment scores against ground-truth Dice.

Pearson and Spearman correlations are computed from first principles (no
silent zero for constant input: that raises UndefinedCorrelationError so a
broken series cannot masquerade as "no correlation"). Bottom-k detection
measures how well the assessment scores pick out the k% worst samples by
true Dice; ties are broken by ascending sample id on both sides so permuting
the input never changes a reported number.
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .backend import PromptBackend, replace_prediction
from .errors import BackendError, ContractViolation, UndefinedCorrelationError
from .objects import extract_objects
from .raster import Image, SegmentationMap
from .scoring import dice


@dataclass(frozen=True)
class PairedSeries:
    """Per-sample (assessment score, true Dice) pairs."""

    sample_ids: Tuple[str, ...]
    scores: Tuple[float, ...]
    truths: Tuple[float, ...]

    def __post_init__(self):
        if not (len(self.sample_ids) == len(self.scores) == len(self.truths)):
            raise ContractViolation("sample_ids, scores, truths must have equal length")
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ContractViolation("sample ids must be unique")

    @property
    def n(self) -> int:
        return len(self.sample_ids)


def true_dice(prediction: SegmentationMap, truth: SegmentationMap) -> float:
    """Macro-mean per-class Dice; classes empty in both maps are excluded.

    When every class is empty in both maps the result is 1.0 (nothing was
    there and nothing was predicted).
    """
    if prediction.num_classes != truth.num_classes:
        raise ContractViolation(
            f"class counts differ: {prediction.num_classes} vs {truth.num_classes}"
        )
    if prediction.data.shape != truth.data.shape:
        raise ContractViolation(
            f"map dimensions differ: {prediction.data.shape} vs {truth.data.shape}"
        )
    values = []
    for c in range(prediction.num_classes):
        p = prediction.channel(c)
        t = truth.channel(c)
        if not p.any() and not t.any():
            continue
        values.append(dice(p, t))
    if not values:
        return 1.0
    return sum(values) / len(values)


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """Fractional ranks (1-based); tied values share the mean of their ranks."""
    arr = np.asarray(values, np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _corr(x: np.ndarray, y: np.ndarray, xname: str, yname: str) -> float:
    if x.size < 2:
        raise ContractViolation(f"correlation needs n >= 2, got n={x.size}")
    if np.all(x == x[0]):
        raise UndefinedCorrelationError(f"{xname} is constant; correlation is undefined")
    if np.all(y == y[0]):
        raise UndefinedCorrelationError(f"{yname} is constant; correlation is undefined")
    dx = x - x.mean()
    dy = y - y.mean()
    r = float((dx * dy).sum() / math.sqrt((dx * dx).sum() * (dy * dy).sum()))
    return max(-1.0, min(1.0, r))


def pearson(series: PairedSeries) -> float:
    """Sample Pearson correlation between assessment scores and true Dice."""
    x = np.asarray(series.scores, np.float64)
    y = np.asarray(series.truths, np.float64)
    return _corr(x, y, "sqa_score", "true_dice")


def spearman(series: PairedSeries) -> float:
    """Pearson correlation of the fractional (average-tie) ranks."""
    x = average_ranks(series.scores)
    y = average_ranks(series.truths)
    return _corr(x, y, "sqa_score", "true_dice")


def bottom_k_accuracy(series: PairedSeries, k: float) -> float:
    """Overlap fraction between the m lowest-score and m lowest-Dice samples.

    m = max(1, floor(n * k / 100)); ties on either side are broken by
    ascending sample id, so the result is permutation-invariant.
    """
    if not 0 < k < 100:
        raise ContractViolation(f"k must be in (0, 100), got {k}")
    if series.n < 1:
        raise ContractViolation("bottom_k_accuracy needs n >= 1")
    m = max(1, math.floor(series.n * k / 100.0))
    by_truth = sorted(range(series.n), key=lambda i: (series.truths[i], series.sample_ids[i]))
    by_score = sorted(range(series.n), key=lambda i: (series.scores[i], series.sample_ids[i]))
    worst_true = {series.sample_ids[i] for i in by_truth[:m]}
    worst_pred = {series.sample_ids[i] for i in by_score[:m]}
    return len(worst_true & worst_pred) / m


@dataclass(frozen=True)
class ReplacementResult:
    improved: int
    degraded: int
    unchanged: int
    failed_ids: Tuple[str, ...]
    per_sample: Tuple[Tuple[str, float, float], ...]  # (id, dice before, dice after)


def replacement_analysis(
    samples: Iterable[Tuple[str, Image, SegmentationMap, SegmentationMap]],
    backend: PromptBackend,
    *,
    connectivity: int = 8,
    min_area: int = 1,
) -> ReplacementResult:
    """Swap each prediction for the backend's box-prompt output and compare
    true Dice before/after. Backend failures are tallied and excluded."""
    improved = degraded = unchanged = 0
    failed = []
    rows = []
    for sample_id, image, prediction, truth in samples:
        before = true_dice(prediction, truth)
        objects = extract_objects(prediction, connectivity=connectivity, min_area=min_area)
        try:
            replaced = replace_prediction(image, objects, prediction.num_classes, backend, sample_id=sample_id)
        except BackendError:
            failed.append(sample_id)
            continue
        after = true_dice(replaced, truth)
        rows.append((sample_id, before, after))
        if after > before:
            improved += 1
        elif after < before:
            degraded += 1
        else:
            unchanged += 1
    return ReplacementResult(improved, degraded, unchanged, tuple(failed), tuple(rows))


@dataclass(frozen=True)
class SampleRow:
    sample_id: str
    sqa_score: float
    confidence: Optional[float]
    true_dice: float
    flags: str


@dataclass(frozen=True)
class EvaluationReport:
    n: int
    pearson: float
    spearman: float
    detection: Tuple[Tuple[float, float], ...]  # (k, accuracy)
    baseline_pearson: Optional[float]
    baseline_spearman: Optional[float]
    baseline_detection: Optional[Tuple[Tuple[float, float], ...]]
    replacement: Optional[ReplacementResult]
    rows: Tuple[SampleRow, ...]

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "correlation": {
                "sqa": {"pearson": self.pearson, "spearman": self.spearman},
            },
            "detection": {
                str(k): {"sqa": acc} for k, acc in self.detection
            },
        }
        if self.baseline_pearson is not None:
            out["correlation"]["model_confidence"] = {
                "pearson": self.baseline_pearson,
                "spearman": self.baseline_spearman,
            }
            for k, acc in self.baseline_detection or ():
                out["detection"][str(k)]["model_confidence"] = acc
        if self.replacement is not None:
            out["replacement"] = {
                "improved": self.replacement.improved,
                "degraded": self.replacement.degraded,
                "unchanged": self.replacement.unchanged,
                "failed": list(self.replacement.failed_ids),
            }
        out["per_sample"] = [
            {
                "sample_id": r.sample_id,
                "sqa_score": r.sqa_score,
                "confidence_baseline": r.confidence,
                "true_dice": r.true_dice,
                "flags": r.flags,
            }
            for r in self.rows
        ]
        return out

    def render_table(self) -> str:
        """Aligned plain-text view: summary block plus one row per sample."""
        lines = [f"samples: {self.n}"]
        lines.append(f"{'method':<18} {'pearson':>9} {'spearman':>9}")
        lines.append(f"{'sqa':<18} {self.pearson:>9.4f} {self.spearman:>9.4f}")
        if self.baseline_pearson is not None:
            lines.append(
                f"{'model_confidence':<18} {self.baseline_pearson:>9.4f} {self.baseline_spearman:>9.4f}"
            )
        for k, acc in self.detection:
            row = f"bottom-{k:g}%{'':<9} sqa={acc:.4f}"
            if self.baseline_detection is not None:
                base = dict(self.baseline_detection).get(k)
                if base is not None:
                    row += f"  model_confidence={base:.4f}"
            lines.append(row)
        if self.replacement is not None:
            rep = self.replacement
            lines.append(
                f"replacement: improved={rep.improved} degraded={rep.degraded} "
                f"unchanged={rep.unchanged} failed={len(rep.failed_ids)}"
            )
        idw = max([len("sample_id")] + [len(r.sample_id) for r in self.rows])
        lines.append("")
        lines.append(f"{'sample_id':<{idw}} {'sqa':>8} {'confidence':>11} {'true_dice':>10}  flags")
        for r in self.rows:
            conf = f"{r.confidence:.4f}" if r.confidence is not None else "-"
            lines.append(
                f"{r.sample_id:<{idw}} {r.sqa_score:>8.4f} {conf:>11} {r.true_dice:>10.4f}  {r.flags}"
            )
        return "\n".join(lines) + "\n"


def evaluate(
    series: PairedSeries,
    k_list: Sequence[float] = (25.0, 50.0),
    *,
    baseline_scores: Optional[Sequence[Optional[float]]] = None,
    flags: Optional[Sequence[str]] = None,
    replacement: Optional[ReplacementResult] = None,
) -> EvaluationReport:
    """Build the full report for one pooled test run."""
    detection = tuple((float(k), bottom_k_accuracy(series, k)) for k in k_list)
    base_p = base_s = None
    base_det: Optional[Tuple[Tuple[float, float], ...]] = None
    usable_baseline = baseline_scores is not None and all(b is not None for b in baseline_scores)
    if usable_baseline:
        base = PairedSeries(series.sample_ids, tuple(float(b) for b in baseline_scores), series.truths)
        try:
            base_p = pearson(base)
            base_s = spearman(base)
            base_det = tuple((float(k), bottom_k_accuracy(base, k)) for k in k_list)
        except UndefinedCorrelationError:
            # a constant baseline is reported as absent, not as an error
            base_p = base_s = None
            base_det = None
    rows = tuple(
        SampleRow(
            sample_id=series.sample_ids[i],
            sqa_score=series.scores[i],
            confidence=(baseline_scores[i] if baseline_scores is not None else None),
            true_dice=series.truths[i],
            flags=(flags[i] if flags is not None else ""),
        )
        for i in range(series.n)
    )
    return EvaluationReport(
        n=series.n,
        pearson=pearson(series),
        spearman=spearman(series),
        detection=detection,
        baseline_pearson=base_p,
        baseline_spearman=base_s,
        baseline_detection=base_det,
        replacement=replacement,
        rows=rows,
    )
