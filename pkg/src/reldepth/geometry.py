"""Bounding-box primitives and pairwise geometric features.

Boxes are half-open pixel rectangles: a box ``(x_min, y_min, x_max, y_max)``
covers the pixels ``x_min <= x < x_max`` and ``y_min <= y < y_max``, so its
width is ``x_max - x_min``. Coordinates are normally integers but real values
are accepted so the features can be checked under arbitrary rescaling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value!r}")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError(f"degenerate box {self.as_tuple()}: need x_max > x_min and y_max > y_min")

    @classmethod
    def from_sequence(cls, coords) -> "BoundingBox":
        x_min, y_min, x_max, y_max = coords
        return cls(x_min, y_min, x_max, y_max)

    def as_tuple(self):
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def centroid(self):
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def fits_in(self, dims: "ImageDims") -> bool:
        return self.x_max <= dims.width and self.y_max <= dims.height

    def scaled(self, factor: float) -> "BoundingBox":
        return BoundingBox(self.x_min * factor, self.y_min * factor, self.x_max * factor, self.y_max * factor)


@dataclass(frozen=True)
class ImageDims:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    """Area shared by two boxes (0 when they are disjoint or only touch)."""
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0
    return w * h


def union_box(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    """Smallest axis-aligned box enclosing both ``a`` and ``b``."""
    return BoundingBox(
        min(a.x_min, b.x_min),
        min(a.y_min, b.y_min),
        max(a.x_max, b.x_max),
        max(a.y_max, b.y_max),
    )


def min_box_distance(a: BoundingBox, b: BoundingBox) -> float:
    """Euclidean distance between the closest points of two rectangles."""
    gap_x = max(0, a.x_min - b.x_max, b.x_min - a.x_max)
    gap_y = max(0, a.y_min - b.y_max, b.y_min - a.y_max)
    return math.hypot(gap_x, gap_y)


# Order is part of the public contract: feature matrices, CSV headers and
# saved models all rely on it.
GEOMETRIC_FEATURE_NAMES = (
    "area1_over_image",
    "area2_over_image",
    "area1_over_union",
    "area2_over_union",
    "overlap_over_min_area",
    "overlap_over_image",
    "overlap_over_total_area",
    "overlap_over_union",
    "aspect1",
    "aspect2",
    "centroid_dist_over_image_diag",
    "centroid_dist_over_union_diag",
    "centroid_dist_over_union_width",
    "centroid_dist_over_union_height",
    "centroid_dist_over_diag1",
    "centroid_dist_over_diag2",
    "box_dist_over_sqrt_union_area",
    "box_dist_over_sqrt_image_area",
    "x_min_ratio",
    "y_min_ratio",
    "x_max_ratio",
    "y_max_ratio",
    "max_over_min_area",
    "area1_over_area2",
    "sign_dx",
    "sign_dy",
    "dx_over_image_width",
    "dy_over_image_height",
    "dx_over_union_width",
    "dy_over_union_height",
    "unit_dx",
    "unit_dy",
)

# Features bounded to [0, 1] by construction.
UNIT_INTERVAL_FEATURES = (
    "area1_over_image",
    "area2_over_image",
    "area1_over_union",
    "area2_over_union",
    "overlap_over_min_area",
    "overlap_over_image",
    "overlap_over_total_area",
    "overlap_over_union",
)

# Limit ratios that add one pixel to the numerator and denominator. They are
# the only features not invariant to a uniform rescaling of the scene.
OFFSET_RATIO_FEATURES = ("x_min_ratio", "y_min_ratio")


_SNAP = 1e-9


def _sign(v: float) -> float:
    return float((v > 0) - (v < 0))


def extract_geometric_features(obj1: BoundingBox, obj2: BoundingBox, img: ImageDims) -> Dict[str, float]:
    """Compute the geometric feature map for the ordered pair ``(obj1, obj2)``.

    ``obj1`` plays the trajector and ``obj2`` the landmark: relative position
    features are expressed as ``centroid(obj1) - centroid(obj2)``. The returned
    dict is ordered as :data:`GEOMETRIC_FEATURE_NAMES`.

    Raises
    ------
    ValueError
        If either box does not fit inside the image.
    """
    for name, box in (("obj1", obj1), ("obj2", obj2)):
        if not box.fits_in(img):
            raise ValueError(f"{name} {box.as_tuple()} exceeds image {img.width}x{img.height}")

    area1, area2 = obj1.area, obj2.area
    img_area = img.area
    ubox = union_box(obj1, obj2)
    u_area = ubox.area
    overlap = intersection_area(obj1, obj2)

    (cx1, cy1), (cx2, cy2) = obj1.centroid, obj2.centroid
    dx, dy = cx1 - cx2, cy1 - cy2
    # offsets at round-off level (real-valued coordinates) count as zero so the
    # sign and unit-vector features do not flip on arithmetic noise
    if abs(dx) <= _SNAP * img.width:
        dx = 0.0
    if abs(dy) <= _SNAP * img.height:
        dy = 0.0
    cdist = math.hypot(dx, dy)
    bdist = min_box_distance(obj1, obj2)

    if cdist > 0:
        unit_dx, unit_dy = dx / cdist, dy / cdist
    else:
        unit_dx, unit_dy = 0.0, 0.0

    values = (
        area1 / img_area,
        area2 / img_area,
        area1 / u_area,
        area2 / u_area,
        overlap / min(area1, area2),
        overlap / img_area,
        overlap / (area1 + area2),
        overlap / u_area,
        obj1.width / obj1.height,
        obj2.width / obj2.height,
        cdist / img.diagonal,
        cdist / ubox.diagonal,
        cdist / ubox.width,
        cdist / ubox.height,
        cdist / obj1.diagonal,
        cdist / obj2.diagonal,
        bdist / math.sqrt(u_area),
        bdist / math.sqrt(img_area),
        (obj1.x_min + 1) / (obj2.x_min + 1),
        (obj1.y_min + 1) / (obj2.y_min + 1),
        obj1.x_max / obj2.x_max,
        obj1.y_max / obj2.y_max,
        max(area1, area2) / min(area1, area2),
        area1 / area2,
        _sign(dx),
        _sign(dy),
        dx / img.width,
        dy / img.height,
        dx / ubox.width,
        dy / ubox.height,
        unit_dx,
        unit_dy,
    )
    return {name: float(v) for name, v in zip(GEOMETRIC_FEATURE_NAMES, values)}
