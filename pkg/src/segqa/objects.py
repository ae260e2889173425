"""Object extraction: per-class connected components and their visual prompts."""

from dataclasses import dataclass

import numpy as np

from ._kernels import label_components
from .errors import ContractViolation
from .raster import SegmentationMap


@dataclass(frozen=True)
class PointPrompt:
    """A single pixel prompt; x is the column, y the row."""

    x: int
    y: int


@dataclass(frozen=True)
class BoxPrompt:
    """Inclusive tight bounding box of a mask."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ContractViolation(f"degenerate box {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1


@dataclass(frozen=True, eq=False)
class ObjectInstance:
    """One predicted object: its mask plus the prompts derived from it.

    class_index is 1-based (class c lives in segmentation channel c - 1);
    object_index is 1-based within the class, in component order.
    """

    class_index: int
    object_index: int
    mask: np.ndarray
    point: PointPrompt
    box: BoxPrompt
    area: int


def connected_components(channel: np.ndarray, connectivity: int = 8, min_area: int = 1):
    """Split a binary channel into its connected components.

    Components of area < min_area are dropped. The returned masks are
    pairwise disjoint, each maximal under the chosen connectivity, and
    ordered by their first pixel in row-major order (top-most, then
    left-most).
    """
    if min_area < 1:
        raise ContractViolation(f"min_area must be >= 1, got {min_area}")
    labels, count = label_components(channel, connectivity)
    if count == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    out = []
    for lab in range(1, count + 1):
        if areas[lab] >= min_area:
            out.append(labels == lab)
    return out


def derive_prompts(mask: np.ndarray):
    """Compute the (point, box) prompts for one object mask.

    The box is the tight inclusive bounding box. The point is the rounded
    coordinate centroid (floor(mean + 0.5) per axis); when that point falls
    outside the mask it snaps to the nearest mask pixel by squared Euclidean
    distance, ties broken by smallest row then smallest column.
    """
    mask = np.asarray(mask, np.bool_)
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise ContractViolation("cannot derive prompts for an empty mask")
    box = BoxPrompt(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
    px = int(np.floor(xs.mean() + 0.5))
    py = int(np.floor(ys.mean() + 0.5))
    if not mask[py, px]:
        d2 = (ys.astype(np.int64) - py) ** 2 + (xs.astype(np.int64) - px) ** 2
        nearest = int(np.argmin(d2))  # nonzero() is row-major, so the first
        py, px = int(ys[nearest]), int(xs[nearest])  # minimum breaks ties by (row, col)
    return PointPrompt(px, py), box


def extract_objects(prediction: SegmentationMap, connectivity: int = 8, min_area: int = 1):
    """Extract every object instance from a prediction, class by class.

    Ordering is deterministic: ascending class index, then component order
    within the class.
    """
    instances = []
    for c in range(prediction.num_classes):
        for j, mask in enumerate(connected_components(prediction.channel(c), connectivity, min_area), start=1):
            point, box = derive_prompts(mask)
            frozen = mask.copy()
            frozen.setflags(write=False)
            instances.append(
                ObjectInstance(
                    class_index=c + 1,
                    object_index=j,
                    mask=frozen,
                    point=point,
                    box=box,
                    area=int(np.count_nonzero(frozen)),
                )
            )
    return instances
