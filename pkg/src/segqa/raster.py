"""Raster types and PNG I/O shared by the whole pipeline.

Conventions: x is the column index, y the row index, origin at the top-left,
zero-indexed. Images are 8-bit (grayscale or RGB); binary masks travel as
8-bit PNGs with values 0/255; probability channels travel as 16-bit PNGs
with probability = value / 65535. All types are immutable after construction
and safe to share between workers.
"""

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage

from .errors import CalibrationError, ContractViolation, FormatError, ValidationError

PROB_SUM_TOL = 1e-3
_U16_MAX = 65535


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Image:
    """An 8-bit raster image, grayscale (h, w) or RGB (h, w, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = _frozen(self.pixels, np.uint8)
        if px.ndim == 3 and px.shape[2] == 1:
            px = _frozen(px[:, :, 0], np.uint8)
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise ContractViolation(f"image must be (h, w) or (h, w, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ContractViolation(f"image dimensions must be >= 1, got {px.shape}")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def luma(self) -> np.ndarray:
        """Per-pixel luma in [0, 255]: round(0.299 R + 0.587 G + 0.114 B)."""
        if self.channels == 1:
            return self.pixels
        rgb = self.pixels.astype(np.float64)
        y = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
        return np.floor(y + 0.5).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class SegmentationMap:
    """Per-class binary prediction channels, shape (num_classes, h, w).

    Channel index c (zero-based) holds class c + 1. Channels may overlap;
    they are processed independently.
    """

    data: np.ndarray

    def __post_init__(self):
        d = _frozen(self.data, np.bool_)
        if d.ndim != 3 or d.shape[0] < 1:
            raise ContractViolation(f"segmentation map must be (C, h, w) with C >= 1, got {d.shape}")
        object.__setattr__(self, "data", d)

    @property
    def num_classes(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def channel(self, index: int) -> np.ndarray:
        return self.data[index]

    @classmethod
    def empty(cls, num_classes: int, height: int, width: int) -> "SegmentationMap":
        return cls(np.zeros((num_classes, height, width), np.bool_))


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """Softmax output, shape (C, h, w); per-pixel channel sums must be 1
    within PROB_SUM_TOL."""

    data: np.ndarray

    def __post_init__(self):
        d = _frozen(self.data, np.float64)
        if d.ndim != 3 or d.shape[0] < 1:
            raise ContractViolation(f"probability map must be (C, h, w) with C >= 1, got {d.shape}")
        if d.min() < 0.0 or d.max() > 1.0:
            raise ContractViolation("probabilities must lie in [0, 1]")
        sums = d.sum(axis=0)
        dev = np.abs(sums - 1.0)
        worst = np.unravel_index(np.argmax(dev), dev.shape)
        if dev[worst] > PROB_SUM_TOL:
            y, x = int(worst[0]), int(worst[1])
            raise CalibrationError(
                f"per-pixel probability sum {sums[worst]:.6f} out of tolerance at (x={x}, y={y})"
            )
        object.__setattr__(self, "data", d)

    @property
    def num_classes(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


# ---------------------------------------------------------------------------
# PNG I/O
# ---------------------------------------------------------------------------


def _open_png(path):
    im = PILImage.open(path)
    if im.format != "PNG":
        im.close()
        raise FormatError(f"{path}: expected a PNG file, found {im.format}")
    return im


def load_image(path) -> Image:
    """Load an 8-bit grayscale or RGB PNG."""
    with _open_png(path) as im:
        if im.mode not in ("L", "RGB"):
            raise FormatError(
                f"{path}: unsupported bit depth/color type (PNG mode {im.mode!r}; "
                "need 8-bit grayscale or RGB)"
            )
        arr = np.asarray(im, dtype=np.uint8)
    return Image(arr)


def save_image(image: Image, path) -> None:
    PILImage.fromarray(image.pixels).save(path, format="PNG")


def image_to_png_bytes(image: Image) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(image.pixels).save(buf, format="PNG")
    return buf.getvalue()


def _mask_from_gray(arr: np.ndarray, origin: str) -> np.ndarray:
    bad = (arr != 0) & (arr != 255)
    if bad.any():
        ys, xs = np.nonzero(bad)
        y, x = int(ys[0]), int(xs[0])
        raise ValidationError(
            f"{origin}: non-binary pixel value {int(arr[y, x])} at (x={x}, y={y}); masks must be 0/255"
        )
    return arr == 255


def load_mask(path) -> np.ndarray:
    """Load one binary mask channel (8-bit gray PNG, values 0/255)."""
    with _open_png(path) as im:
        if im.mode != "L":
            raise FormatError(f"{path}: mask must be a single-channel 8-bit PNG, got mode {im.mode!r}")
        arr = np.asarray(im, dtype=np.uint8)
    return _mask_from_gray(arr, str(path))


def mask_from_png_bytes(data: bytes, origin: str = "<bytes>") -> np.ndarray:
    with PILImage.open(io.BytesIO(data)) as im:
        if im.format != "PNG":
            raise FormatError(f"{origin}: expected PNG data, found {im.format}")
        if im.mode != "L":
            raise FormatError(f"{origin}: mask must be a single-channel 8-bit PNG, got mode {im.mode!r}")
        arr = np.asarray(im, dtype=np.uint8)
    return _mask_from_gray(arr, origin)


def save_mask(mask: np.ndarray, path) -> None:
    arr = np.where(np.asarray(mask, np.bool_), np.uint8(255), np.uint8(0))
    PILImage.fromarray(arr).save(path, format="PNG")


def mask_to_png_bytes(mask: np.ndarray) -> bytes:
    buf = io.BytesIO()
    arr = np.where(np.asarray(mask, np.bool_), np.uint8(255), np.uint8(0))
    PILImage.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def load_segmentation(paths: Sequence) -> SegmentationMap:
    """Load one binary PNG per class, channel order = class order."""
    if not paths:
        raise ContractViolation("load_segmentation needs at least one channel path")
    masks = []
    for p in paths:
        m = load_mask(p)
        if masks and m.shape != masks[0].shape:
            raise ValidationError(
                f"{p}: channel dimensions {m.shape[::-1]} do not match {paths[0]} {masks[0].shape[::-1]}"
            )
        masks.append(m)
    return SegmentationMap(np.stack(masks))


def save_segmentation(segmap: SegmentationMap, paths: Sequence) -> None:
    if len(paths) != segmap.num_classes:
        raise ContractViolation(f"need {segmap.num_classes} paths, got {len(paths)}")
    for c, p in enumerate(paths):
        save_mask(segmap.channel(c), p)


def load_probability(paths: Sequence) -> ProbabilityMap:
    """Load per-class 16-bit PNG channels; probability = value / 65535."""
    if not paths:
        raise ContractViolation("load_probability needs at least one channel path")
    chans = []
    for p in paths:
        with _open_png(p) as im:
            if im.mode not in ("I;16", "I"):
                raise FormatError(
                    f"{p}: probability channels must be 16-bit single-channel PNGs, got mode {im.mode!r}"
                )
            arr = np.asarray(im).astype(np.int64)
        if arr.min() < 0 or arr.max() > _U16_MAX:
            raise FormatError(f"{p}: sample values outside the 16-bit range")
        if chans and arr.shape != chans[0].shape:
            raise ValidationError(
                f"{p}: channel dimensions {arr.shape[::-1]} do not match {paths[0]} {chans[0].shape[::-1]}"
            )
        chans.append(arr)
    data = np.stack(chans).astype(np.float64) / _U16_MAX
    return ProbabilityMap(data)


def save_probability(prob: ProbabilityMap, paths: Sequence) -> None:
    if len(paths) != prob.num_classes:
        raise ContractViolation(f"need {prob.num_classes} paths, got {len(paths)}")
    for c, p in enumerate(paths):
        arr = np.rint(prob.data[c] * _U16_MAX).astype(np.uint16)
        PILImage.fromarray(arr).save(p, format="PNG")


def import_labelmap(path, num_classes: int) -> SegmentationMap:
    """Convert a label-indexed PNG (0 = background, i = class i) to per-class channels."""
    if num_classes < 1:
        raise ContractViolation(f"num_classes must be >= 1, got {num_classes}")
    with _open_png(path) as im:
        if im.mode != "L":
            raise FormatError(f"{path}: labelmap must be a single-channel 8-bit PNG, got mode {im.mode!r}")
        arr = np.asarray(im, dtype=np.uint8)
    bad = arr > num_classes
    if bad.any():
        ys, xs = np.nonzero(bad)
        y, x = int(ys[0]), int(xs[0])
        raise ValidationError(
            f"{path}: label {int(arr[y, x])} at (x={x}, y={y}) exceeds num_classes={num_classes}"
        )
    return SegmentationMap(np.stack([arr == i for i in range(1, num_classes + 1)]))
