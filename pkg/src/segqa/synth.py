"""Synthetic scenes, controlled degradations, and corpus generation.

Scenes are two-tone grayscale images (objects over background, Gaussian
noise) whose ground truth is known exactly. Degradations perturb the truth
into a "prediction" with a pixel-exact true Dice, which lets correlation
claims be checked on a desk-scale corpus without external datasets or model
weights. Everything is a pure function of the specs' seeds.
"""

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ._kernels import label_components, shift2d
from .errors import ContractViolation, GenerationError, ValidationError
from .evaluation import true_dice
from .raster import (
    Image,
    ProbabilityMap,
    SegmentationMap,
    save_image,
    save_mask,
    save_probability,
)

SHAPE_KINDS = ("ellipse", "rectangle", "blob")
DEGRADATION_KINDS = ("erode", "dilate", "translate", "boundary_jitter", "drop_object", "spurious_blob")

# maximum magnitude accepted per kind (radius px, shift px, band px, counts)
MAGNITUDE_BOUNDS = {
    "erode": 16.0,
    "dilate": 16.0,
    "translate": 40.0,
    "boundary_jitter": 10.0,
    "drop_object": 8.0,
    "spurious_blob": 10.0,
}

# default corpus ramps magnitudes from 0 up to these values
DEFAULT_MAX_MAGNITUDE = {
    "erode": 12.0,
    "dilate": 12.0,
    "translate": 26.0,
    "boundary_jitter": 6.0,
    "drop_object": 4.0,
    "spurious_blob": 6.0,
}

_CONF_HIGH = 0.95
_CONF_LOW = 0.55
_CONF_DECAY_RADIUS = 6.0
# per-sample confidence offset range: models are not calibrated across
# samples, so the confidence baseline must not be a perfect oracle
_CONF_JITTER = (-0.12, 0.08)

_COMPASS = ((0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    width: int = 160
    height: int = 160
    num_classes: int = 1
    min_objects: int = 1
    max_objects: int = 3
    shapes: Tuple[str, ...] = SHAPE_KINDS
    fg_mean: float = 180.0
    bg_mean: float = 60.0
    noise_sigma: float = 6.0
    min_radius: int = 8
    max_radius: int = 22
    margin: int = 4

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ValidationError(f"scene must be at least 32x32, got {self.width}x{self.height}")
        if self.num_classes < 1:
            raise ValidationError("num_classes must be >= 1")
        if not 1 <= self.min_objects <= self.max_objects:
            raise ValidationError("need 1 <= min_objects <= max_objects")
        for s in self.shapes:
            if s not in SHAPE_KINDS:
                raise ValidationError(f"unknown shape kind {s!r}")
        if not self.shapes:
            raise ValidationError("at least one shape kind required")
        if not 2 <= self.min_radius <= self.max_radius:
            raise ValidationError("need 2 <= min_radius <= max_radius")
        if abs(self.fg_mean - self.bg_mean) < 3.0 * self.noise_sigma:
            raise ValidationError(
                f"foreground/background separation {abs(self.fg_mean - self.bg_mean):.1f} "
                f"is below 3 sigma = {3.0 * self.noise_sigma:.1f}"
            )


@dataclass(frozen=True)
class DegradationSpec:
    kind: str
    magnitude: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DEGRADATION_KINDS:
            raise ValidationError(f"unknown degradation kind {self.kind!r}")
        bound = MAGNITUDE_BOUNDS[self.kind]
        if not 0.0 <= self.magnitude <= bound:
            raise ValidationError(
                f"{self.kind} magnitude {self.magnitude} outside [0, {bound}]"
            )


def _disk(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return yy * yy + xx * xx <= r * r


def _erode(channel: np.ndarray, radius: float) -> np.ndarray:
    # erosion by a euclidean ball == distance-to-background > radius
    return ndimage.distance_transform_edt(channel) > radius


def _dilate(channel: np.ndarray, radius: float) -> np.ndarray:
    return ndimage.distance_transform_edt(~channel) <= radius


def _place_center(rng, spec: SceneSpec, extent_y: int, extent_x: int):
    lo_y, hi_y = spec.margin + extent_y + 1, spec.height - spec.margin - extent_y - 1
    lo_x, hi_x = spec.margin + extent_x + 1, spec.width - spec.margin - extent_x - 1
    if lo_y >= hi_y or lo_x >= hi_x:
        return None
    return int(rng.integers(lo_y, hi_y)), int(rng.integers(lo_x, hi_x))


def _random_shape(rng, spec: SceneSpec, yy, xx) -> Optional[np.ndarray]:
    kind = spec.shapes[int(rng.integers(len(spec.shapes)))]
    if kind == "ellipse":
        a = float(rng.uniform(spec.min_radius, spec.max_radius))
        b = float(rng.uniform(spec.min_radius, spec.max_radius))
        theta = float(rng.uniform(0.0, math.pi))
        ext = int(math.ceil(max(a, b)))
        center = _place_center(rng, spec, ext, ext)
        if center is None:
            return None
        cy, cx = center
        u = (xx - cx) * math.cos(theta) + (yy - cy) * math.sin(theta)
        v = -(xx - cx) * math.sin(theta) + (yy - cy) * math.cos(theta)
        return (u / a) ** 2 + (v / b) ** 2 <= 1.0
    if kind == "rectangle":
        hw = int(rng.integers(spec.min_radius, spec.max_radius + 1))
        hh = int(rng.integers(spec.min_radius, spec.max_radius + 1))
        center = _place_center(rng, spec, hh, hw)
        if center is None:
            return None
        cy, cx = center
        return (np.abs(xx - cx) <= hw) & (np.abs(yy - cy) <= hh)
    # blob: random walk from the center, dilated into a solid region
    blob_r = int(rng.integers(3, max(4, spec.min_radius // 2) + 1))
    walk_extent = int(rng.integers(spec.min_radius, spec.max_radius + 1))
    reach = max(1, walk_extent - blob_r)
    center = _place_center(rng, spec, walk_extent, walk_extent)
    if center is None:
        return None
    cy, cx = center
    visited = np.zeros((spec.height, spec.width), np.bool_)
    y, x = cy, cx
    visited[y, x] = True
    for _ in range(int(rng.integers(15, 40))):
        dy, dx = _COMPASS[int(rng.integers(4))]
        y = int(np.clip(y + dy, cy - reach, cy + reach))
        x = int(np.clip(x + dx, cx - reach, cx + reach))
        visited[y, x] = True
    return _dilate(visited, blob_r)


def generate_scene(spec: SceneSpec) -> Tuple[Image, SegmentationMap]:
    """Render one scene and its exact ground truth; deterministic per seed.

    Objects never overlap (a 2 px gap keeps per-class components distinct)
    and respect the image bounds.
    """
    rng = np.random.default_rng(spec.seed)
    h, w, c = spec.height, spec.width, spec.num_classes
    yy, xx = np.mgrid[0:h, 0:w]
    target = int(rng.integers(spec.min_objects, spec.max_objects + 1))
    channels = np.zeros((c, h, w), np.bool_)
    blocked = np.zeros((h, w), np.bool_)
    placed = 0
    attempts = 0
    while placed < target:
        attempts += 1
        if attempts > 200 * target:
            raise GenerationError(
                f"could not place {target} non-overlapping objects after {attempts} attempts"
            )
        mask = _random_shape(rng, spec, yy, xx)
        if mask is None or not mask.any():
            continue
        if (mask & blocked).any():
            continue
        cls = int(rng.integers(c))
        channels[cls] |= mask
        blocked |= _dilate(mask, 2.0)
        placed += 1
    union = channels.any(axis=0)
    base = np.where(union, spec.fg_mean, spec.bg_mean)
    noisy = base + rng.normal(0.0, spec.noise_sigma, (h, w))
    pixels = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
    return Image(pixels), SegmentationMap(channels)


def _apply_degradation(data: np.ndarray, spec: DegradationSpec, rng) -> np.ndarray:
    pred = data.copy()
    c = pred.shape[0]
    kind, mag = spec.kind, spec.magnitude
    if kind == "erode":
        for i in range(c):
            pred[i] = _erode(pred[i], mag)
    elif kind == "dilate":
        for i in range(c):
            pred[i] = _dilate(pred[i], mag)
    elif kind == "translate":
        dy, dx = _COMPASS[int(rng.integers(len(_COMPASS)))]
        step = int(round(mag))
        for i in range(c):
            pred[i] = shift2d(pred[i], dy * step, dx * step, False)
    elif kind == "boundary_jitter":
        band_r = int(round(mag))
        if band_r > 0:
            for i in range(c):
                ch = pred[i]
                band = (ch & (ndimage.distance_transform_edt(ch) <= band_r)) | (
                    ~ch & (ndimage.distance_transform_edt(~ch) <= band_r)
                )
                flips = band & (rng.random(ch.shape) < 0.5)
                pred[i] = ch ^ flips
    elif kind == "drop_object":
        k = int(round(mag))
        comps = []
        labelled = []
        for i in range(c):
            labels, count = label_components(pred[i], 8)
            labelled.append(labels)
            comps.extend((i, lab) for lab in range(1, count + 1))
        if comps and k > 0:
            chosen = rng.choice(len(comps), size=min(k, len(comps)), replace=False)
            for idx in sorted(int(i) for i in chosen):
                ch_i, lab = comps[idx]
                pred[ch_i][labelled[ch_i] == lab] = False
    elif kind == "spurious_blob":
        k = int(round(mag))
        h, w = pred.shape[1:]
        forbidden = _dilate(pred.any(axis=0), 3.0)
        for _ in range(k):
            for _attempt in range(50):
                r = int(rng.integers(3, 7))
                if h <= 2 * r + 2 or w <= 2 * r + 2:
                    break
                cy = int(rng.integers(r + 1, h - r - 1))
                cx = int(rng.integers(r + 1, w - r - 1))
                blob = np.zeros((h, w), np.bool_)
                sl = (slice(cy - r, cy + r + 1), slice(cx - r, cx + r + 1))
                blob[sl] = _disk(r)
                if not (blob & forbidden).any():
                    cls = int(rng.integers(c))
                    pred[cls] |= blob
                    forbidden |= _dilate(blob, 2.0)
                    break
    return pred


def _probability_for(pred: np.ndarray, truth: np.ndarray, rng) -> ProbabilityMap:
    """Softmax-style map consistent with the prediction (argmax == prediction)
    with confidence decaying toward modified pixels plus a per-sample offset."""
    c, h, w = pred.shape
    cp = c + 1  # channel 0 = background
    diff = (pred != truth).any(axis=0)
    if diff.any():
        dist = ndimage.distance_transform_edt(~diff)
        conf = _CONF_LOW + (_CONF_HIGH - _CONF_LOW) * np.minimum(dist / _CONF_DECAY_RADIUS, 1.0)
    else:
        conf = np.full((h, w), _CONF_HIGH)
    conf = conf + rng.uniform(*_CONF_JITTER)
    conf = np.clip(conf, 1.0 / cp + 0.02, 0.995)
    winner = np.zeros((h, w), np.int64)
    for i in range(c):
        winner[pred[i]] = i + 1
    rest = (1.0 - conf) / (cp - 1)
    prob = np.empty((cp, h, w), np.float64)
    for ch in range(cp):
        prob[ch] = np.where(winner == ch, conf, rest)
    return ProbabilityMap(prob)


def degrade(truth: SegmentationMap, spec: DegradationSpec) -> Tuple[SegmentationMap, ProbabilityMap]:
    """Perturb a ground truth into a prediction plus a consistent probability map.

    Magnitude 0 returns the truth unchanged. When channels overlap after a
    perturbation the lower class index wins, so the per-pixel argmax of the
    probability map always reproduces the prediction.
    """
    rng = np.random.default_rng(spec.seed)
    pred = _apply_degradation(truth.data, spec, rng) if spec.magnitude > 0 else truth.data.copy()
    for i in range(1, pred.shape[0]):
        pred[i] &= ~pred[:i].any(axis=0)
    prob = _probability_for(pred, truth.data, rng)
    return SegmentationMap(pred), prob


def default_degradation_plan(n: int, base_seed: int) -> list:
    """One spec per sample: kinds cycle, magnitudes ramp from 0 to the kind max."""
    kinds = DEGRADATION_KINDS
    cycles_total = max(1, (n + len(kinds) - 1) // len(kinds))
    specs = []
    for i in range(n):
        kind = kinds[i % len(kinds)]
        cycle = i // len(kinds)
        t = cycle / max(1, cycles_total - 1)
        mag = round(t * DEFAULT_MAX_MAGNITUDE[kind], 3)
        specs.append(DegradationSpec(kind=kind, magnitude=mag, seed=base_seed + 7919 * i + 1))
    return specs


def build_corpus(
    n: int,
    scene: SceneSpec,
    degradations: Optional[Sequence[DegradationSpec]],
    out_dir,
) -> Path:
    """Write n samples (image, prediction, probability, truth) plus manifest.

    When ``degradations`` is given its entries are applied cyclically;
    otherwise the default ramp plan spreads magnitudes so the corpus spans a
    wide true-Dice range. Returns the manifest path. A corpus_stats.json
    sidecar records the generator's exact true Dice per sample.
    """
    if n < 0:
        raise ContractViolation(f"n must be >= 0, got {n}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if degradations:
        plan = [degradations[i % len(degradations)] for i in range(n)]
    else:
        plan = default_degradation_plan(n, base_seed=scene.seed + 10_000_019)

    samples = []
    stats = []
    for i in range(n):
        sample_id = f"s{i:04d}"
        sdir = out / sample_id
        sdir.mkdir(exist_ok=True)
        image, truth = generate_scene(replace(scene, seed=scene.seed + i))
        pred, prob = degrade(truth, plan[i])
        recorded = true_dice(pred, truth)

        save_image(image, sdir / "image.png")
        pred_paths = []
        truth_paths = []
        for ci in range(truth.num_classes):
            pred_paths.append(f"{sample_id}/pred_{ci:02d}.png")
            truth_paths.append(f"{sample_id}/truth_{ci:02d}.png")
            save_mask(pred.channel(ci), out / pred_paths[-1])
            save_mask(truth.channel(ci), out / truth_paths[-1])
        prob_paths = [f"{sample_id}/prob_{ci:02d}.png" for ci in range(prob.num_classes)]
        save_probability(prob, [out / p for p in prob_paths])

        samples.append(
            {
                "sample_id": sample_id,
                "image": f"{sample_id}/image.png",
                "prediction": pred_paths,
                "probability": prob_paths,
                "truth": truth_paths,
            }
        )
        stats.append(
            {
                "sample_id": sample_id,
                "kind": plan[i].kind,
                "magnitude": plan[i].magnitude,
                "true_dice": recorded,
            }
        )

    manifest_path = out / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump({"version": 1, "samples": samples}, fh, indent=2)
        fh.write("\n")
    dice_values = [s["true_dice"] for s in stats]
    stats_doc = {
        "scene": asdict(scene),
        "n": n,
        "true_dice_min": min(dice_values) if dice_values else None,
        "true_dice_max": max(dice_values) if dice_values else None,
        "samples": stats,
    }
    with open(out / "corpus_stats.json", "w") as fh:
        json.dump(stats_doc, fh, indent=2)
        fh.write("\n")
    return manifest_path
