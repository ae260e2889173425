"""Promptable-segmenter backends: reference, file (replay), and remote (HTTP).

Every backend maps (image, prompt) to one binary mask with the image's
dimensions; that dimension law is asserted on every call. The reference
backend is a deterministic intensity-based stand-in for a learned model:
point prompts are answered by an 8-connected flood fill within a luma
tolerance of the seed pixel, box prompts by Otsu-thresholding the box and
keeping the largest connected region of the class that matches the box
center.

Wire protocol of the remote backend (bit-exact):
  POST {endpoint}/v1/segment
  body {"image_png_base64": <str>,
        "prompt": {"type": "point", "x": int, "y": int}
               | {"type": "box", "x_min": int, "y_min": int,
                  "x_max": int, "y_max": int}}
  200 response {"mask_png_base64": <str>} with a single-channel 8-bit PNG
  (values 0/255) of the image's dimensions. Box bounds are inclusive;
  coordinates are zero-indexed with origin top-left.
"""

import base64
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import requests

from ._kernels import flood_fill_tolerance, label_components
from .errors import (
    BackendUnavailableError,
    ContractViolation,
    MissingFixtureError,
    ProtocolError,
)
from .objects import BoxPrompt, ObjectInstance, PointPrompt
from .raster import Image, SegmentationMap, image_to_png_bytes, mask_from_png_bytes

DEFAULT_TOLERANCE = 12


@dataclass(frozen=True, eq=False)
class PromptResult:
    """One backend answer: the mask, who produced it, and how long it took."""

    mask: np.ndarray
    source: str
    latency_ms: float


@dataclass(frozen=True)
class QueryContext:
    """Identifies which sample/object a query belongs to (file backend replay)."""

    sample_id: Optional[str] = None
    class_index: Optional[int] = None
    object_index: Optional[int] = None


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "reference"
    tolerance: int = DEFAULT_TOLERANCE
    root: Optional[str] = None
    endpoint: Optional[str] = None
    timeout: float = 30.0
    retries: int = 2
    max_inflight: int = 4

    def __post_init__(self):
        if self.kind not in ("reference", "file", "remote"):
            raise ContractViolation(f"unknown backend kind {self.kind!r}")
        if not 0 <= self.tolerance <= 255:
            raise ContractViolation(f"tolerance must be in [0, 255], got {self.tolerance}")
        if self.retries < 0:
            raise ContractViolation(f"retries must be >= 0, got {self.retries}")
        if self.timeout <= 0:
            raise ContractViolation(f"timeout must be > 0, got {self.timeout}")


class PromptBackend:
    """Base class enforcing prompt bounds and the mask dimension law."""

    name = "abstract"

    def segment_point(self, image: Image, prompt: PointPrompt, ctx: Optional[QueryContext] = None) -> PromptResult:
        if not (0 <= prompt.x < image.width and 0 <= prompt.y < image.height):
            raise ContractViolation(
                f"point ({prompt.x}, {prompt.y}) outside {image.width}x{image.height} image"
            )
        t0 = time.perf_counter()
        mask = self._point_mask(image, prompt, ctx)
        return self._result(image, mask, t0)

    def segment_box(self, image: Image, prompt: BoxPrompt, ctx: Optional[QueryContext] = None) -> PromptResult:
        if not (0 <= prompt.x_min and prompt.x_max < image.width and 0 <= prompt.y_min and prompt.y_max < image.height):
            raise ContractViolation(f"box {prompt} outside {image.width}x{image.height} image")
        t0 = time.perf_counter()
        mask = self._box_mask(image, prompt, ctx)
        return self._result(image, mask, t0)

    def _result(self, image: Image, mask: np.ndarray, t0: float) -> PromptResult:
        mask = np.asarray(mask, np.bool_)
        if mask.shape != (image.height, image.width):
            raise ProtocolError(
                f"mask_png_base64: mask dimensions {mask.shape[1]}x{mask.shape[0]} "
                f"do not match image {image.width}x{image.height}"
            )
        mask.setflags(write=False)
        return PromptResult(mask=mask, source=self.name, latency_ms=(time.perf_counter() - t0) * 1000.0)

    def _point_mask(self, image, prompt, ctx):
        raise NotImplementedError

    def _box_mask(self, image, prompt, ctx):
        raise NotImplementedError


def _otsu_threshold(hist: np.ndarray) -> Optional[int]:
    """Between-class-variance-maximizing split of a 256-bin histogram.

    Returns k such that the two classes are (value <= k) and (value > k),
    both nonempty; None when the histogram occupies a single bin. Ties take
    the smallest k.
    """
    nz = np.nonzero(hist)[0]
    if nz.size <= 1:
        return None
    lo, hi = int(nz[0]), int(nz[-1])
    p = hist.astype(np.float64) / hist.sum()
    omega = np.cumsum(p)
    mu = np.cumsum(p * np.arange(256))
    mu_t = mu[-1]
    ks = np.arange(lo, hi)  # both classes nonempty on this range
    num = (mu_t * omega[ks] - mu[ks]) ** 2
    den = omega[ks] * (1.0 - omega[ks])
    sigma_b = num / den
    return int(ks[np.argmax(sigma_b)])


class ReferenceBackend(PromptBackend):
    """Deterministic intensity-based segmenter used as the SAM stand-in."""

    name = "reference"

    def __init__(self, tolerance: int = DEFAULT_TOLERANCE):
        if not 0 <= tolerance <= 255:
            raise ContractViolation(f"tolerance must be in [0, 255], got {tolerance}")
        self.tolerance = tolerance

    def _point_mask(self, image, prompt, ctx):
        return flood_fill_tolerance(image.luma(), prompt.y, prompt.x, self.tolerance)

    def _box_mask(self, image, prompt, ctx):
        luma = image.luma()
        sub = luma[prompt.y_min : prompt.y_max + 1, prompt.x_min : prompt.x_max + 1]
        out = np.zeros(luma.shape, np.bool_)
        hist = np.bincount(sub.ravel(), minlength=256)
        k = _otsu_threshold(hist)
        if k is None:
            # single-intensity box: no split exists, return the whole box
            out[prompt.y_min : prompt.y_max + 1, prompt.x_min : prompt.x_max + 1] = True
            return out
        low = sub <= k
        # class means from integer histogram sums: exact, portable arithmetic
        values = np.arange(256, dtype=np.int64)
        n_low = int(hist[: k + 1].sum())
        n_high = int(hist[k + 1 :].sum())
        mean_low = int((hist[: k + 1] * values[: k + 1]).sum()) / n_low
        mean_high = int((hist[k + 1 :] * values[k + 1 :]).sum()) / n_high
        cx = (prompt.x_min + prompt.x_max) // 2
        cy = (prompt.y_min + prompt.y_max) // 2
        center = float(luma[cy, cx])
        chosen = low if abs(mean_low - center) <= abs(mean_high - center) else ~low
        labels, count = label_components(chosen, 8)
        areas = np.bincount(labels.ravel(), minlength=count + 1)[1:]
        best = int(np.argmax(areas)) + 1  # ties: smallest label = first pixel row-major
        out[prompt.y_min : prompt.y_max + 1, prompt.x_min : prompt.x_max + 1] = labels == best
        return out


class FileBackend(PromptBackend):
    """Replays precomputed masks from {root}/{sample_id}/{class}_{object}_{point|box}.png."""

    name = "file"

    def __init__(self, root):
        self.root = Path(root)

    def _load(self, ctx: Optional[QueryContext], mode: str) -> np.ndarray:
        if ctx is None or ctx.sample_id is None or ctx.class_index is None or ctx.object_index is None:
            raise ContractViolation("file backend queries need a full QueryContext")
        path = self.root / ctx.sample_id / f"{ctx.class_index}_{ctx.object_index}_{mode}.png"
        if not path.exists():
            raise MissingFixtureError(f"no precomputed mask at {path}")
        from .raster import load_mask

        return load_mask(path)

    def _point_mask(self, image, prompt, ctx):
        return self._load(ctx, "point")

    def _box_mask(self, image, prompt, ctx):
        return self._load(ctx, "box")


class RemoteBackend(PromptBackend):
    """HTTP client for the wire protocol above; stateless between calls."""

    name = "remote"

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2, max_inflight: int = 4):
        if not endpoint:
            raise ContractViolation("remote backend needs an endpoint URL")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._gate = threading.Semaphore(max(1, max_inflight))

    def _point_mask(self, image, prompt, ctx):
        return self._query(image, {"type": "point", "x": prompt.x, "y": prompt.y})

    def _box_mask(self, image, prompt, ctx):
        return self._query(
            image,
            {
                "type": "box",
                "x_min": prompt.x_min,
                "y_min": prompt.y_min,
                "x_max": prompt.x_max,
                "y_max": prompt.y_max,
            },
        )

    def _query(self, image: Image, prompt: dict) -> np.ndarray:
        body = {
            "image_png_base64": base64.b64encode(image_to_png_bytes(image)).decode("ascii"),
            "prompt": prompt,
        }
        url = self.endpoint + "/v1/segment"
        last = None
        for _ in range(self.retries + 1):
            try:
                with self._gate:
                    resp = requests.post(url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last = exc
                continue
            if resp.status_code != 200:
                last = f"HTTP {resp.status_code}"
                continue
            try:
                payload = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"response body: not valid JSON ({exc})") from exc
            if not isinstance(payload, dict) or "mask_png_base64" not in payload:
                raise ProtocolError("mask_png_base64: field missing from response")
            try:
                raw = base64.b64decode(payload["mask_png_base64"], validate=True)
            except (ValueError, TypeError) as exc:
                raise ProtocolError(f"mask_png_base64: invalid base64 ({exc})") from exc
            try:
                return mask_from_png_bytes(raw, origin="mask_png_base64")
            except Exception as exc:
                raise ProtocolError(f"mask_png_base64: {exc}") from exc
        raise BackendUnavailableError(f"{url}: giving up after {self.retries + 1} attempts ({last})")


class EchoBackend(PromptBackend):
    """Returns the mask of the object a prompt was derived from.

    A diagnostic backend: with it, every per-object agreement score is exact
    (tau(m, m) = 1 for both prompts), which pins the scoring fixed point.
    """

    name = "echo"

    def __init__(self, objects: Sequence[ObjectInstance]):
        self._objects = list(objects)

    def _by_ctx(self, ctx: Optional[QueryContext]):
        if ctx is None or ctx.class_index is None or ctx.object_index is None:
            return None
        for obj in self._objects:
            if obj.class_index == ctx.class_index and obj.object_index == ctx.object_index:
                return obj.mask
        return None

    def _point_mask(self, image, prompt, ctx):
        hit = self._by_ctx(ctx)
        if hit is not None:
            return hit
        for obj in self._objects:
            if obj.mask[prompt.y, prompt.x]:
                return obj.mask
        return np.zeros((image.height, image.width), np.bool_)

    def _box_mask(self, image, prompt, ctx):
        hit = self._by_ctx(ctx)
        if hit is not None:
            return hit
        for obj in self._objects:
            if obj.box == prompt:
                return obj.mask
        return np.zeros((image.height, image.width), np.bool_)


class EmptyBackend(PromptBackend):
    """Always answers with an empty mask (adversarial floor for tests)."""

    name = "empty"

    def _point_mask(self, image, prompt, ctx):
        return np.zeros((image.height, image.width), np.bool_)

    _box_mask = _point_mask


def build_backend(config: BackendConfig) -> PromptBackend:
    if config.kind == "reference":
        return ReferenceBackend(tolerance=config.tolerance)
    if config.kind == "file":
        if not config.root:
            raise ContractViolation("file backend needs a root directory")
        return FileBackend(config.root)
    if config.kind == "remote":
        if not config.endpoint:
            raise ContractViolation("remote backend needs an endpoint URL")
        return RemoteBackend(
            config.endpoint,
            timeout=config.timeout,
            retries=config.retries,
            max_inflight=config.max_inflight,
        )
    raise ContractViolation(f"unknown backend kind {config.kind!r}")


def replace_prediction(
    image: Image,
    objects: Sequence[ObjectInstance],
    num_classes: int,
    backend: PromptBackend,
    sample_id: Optional[str] = None,
) -> SegmentationMap:
    """Rebuild a prediction from the backend's box-prompt masks.

    Per class, the union of the backend's answers for that class's objects;
    classes with no objects stay empty. Used to ask whether the promptable
    segmenter's output would beat the original prediction outright.
    """
    channels = np.zeros((num_classes, image.height, image.width), np.bool_)
    for obj in objects:
        ctx = QueryContext(sample_id=sample_id, class_index=obj.class_index, object_index=obj.object_index)
        res = backend.segment_box(image, obj.box, ctx)
        channels[obj.class_index - 1] |= res.mask
    return SegmentationMap(channels)
