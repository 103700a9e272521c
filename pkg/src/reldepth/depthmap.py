"""Per-object depth from dense depth maps, and agreement between label sources.

A depth map is sampled at pixel centres: pixel ``(x, y)`` lies inside a box
when ``x_min <= x + 0.5 < x_max`` and likewise for ``y``, which for integer
boxes is exactly the half-open pixel range used by :mod:`reldepth.geometry`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from .dataset import ImageRecord, build_pairs, derive_class
from .geometry import BoundingBox, ImageDims

MIDPOINT_DEPTH = 50.0
SCALE_MIN, SCALE_MAX = 1.0, 100.0


class DepthMapError(ValueError):
    pass


@dataclass
class DepthMap:
    """Row-major grid of depths (``invert=False``) or disparities (``invert=True``)."""

    values: np.ndarray
    invert: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.size == 0:
            raise DepthMapError(f"depth map must be a non-empty 2-D grid, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DepthMapError("depth map contains non-finite values")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def check_dims(self, dims: ImageDims) -> None:
        if (self.width, self.height) != (dims.width, dims.height):
            raise DepthMapError(
                f"depth map is {self.width}x{self.height} but the image is {dims.width}x{dims.height}"
            )

    def affine(self, scale: float, shift: float) -> "DepthMap":
        return DepthMap(scale * self.values + shift, self.invert)


def load_depth_map(path, dims: Optional[ImageDims] = None, invert: bool = True) -> DepthMap:
    """Read a grid file: ``width height`` then ``height`` rows of ``width`` reals.

    ``.npy`` files holding a 2-D array are accepted as well.
    """
    path = Path(path)
    if path.suffix == ".npy":
        dm = DepthMap(np.load(path), invert)
    else:
        tokens = path.read_text().split()
        if len(tokens) < 2:
            raise DepthMapError(f"{path}: missing 'width height' header")
        try:
            width, height = int(tokens[0]), int(tokens[1])
        except ValueError as exc:
            raise DepthMapError(f"{path}: bad header {tokens[:2]!r}") from exc
        if width <= 0 or height <= 0:
            raise DepthMapError(f"{path}: non-positive dimensions {width}x{height}")
        body = tokens[2:]
        if len(body) != width * height:
            raise DepthMapError(f"{path}: header says {width}x{height} = {width * height} values, found {len(body)}")
        try:
            values = np.array([float(t) for t in body]).reshape(height, width)
        except ValueError as exc:
            raise DepthMapError(f"{path}: {exc}") from exc
        if not np.all(np.isfinite(values)):
            raise DepthMapError(f"{path}: non-finite depth value")
        dm = DepthMap(values, invert)
    if dims is not None:
        dm.check_dims(dims)
    return dm


def write_depth_map(dm: DepthMap, path) -> None:
    lines = [f"{dm.width} {dm.height}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in dm.values]
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path) -> Dict[str, Path]:
    """Map image id -> depth-map file.

    The manifest is a JSON object ``{image_id: path}``; relative paths are
    resolved against the manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DepthMapError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise DepthMapError(f"{path}: expected an object mapping image ids to files")
    return {str(k): (path.parent / v) for k, v in doc.items()}


# ---------------------------------------------------------------------------
# per-object aggregation


def _box_pixels(dm: DepthMap, box: BoundingBox):
    if box.x_max > dm.width or box.y_max > dm.height:
        raise DepthMapError(f"box {box.as_tuple()} lies outside the {dm.width}x{dm.height} depth map")
    x0, x1 = math.ceil(box.x_min - 0.5), math.ceil(box.x_max - 0.5)
    y0, y1 = math.ceil(box.y_min - 0.5), math.ceil(box.y_max - 0.5)
    if x1 <= x0 or y1 <= y0:
        raise DepthMapError(f"box {box.as_tuple()} contains no pixel centre")
    return x0, x1, y0, y1


def mean_depth(dm: DepthMap, box: BoundingBox) -> float:
    """Arithmetic mean of the map over the pixels inside ``box``."""
    x0, x1, y0, y1 = _box_pixels(dm, box)
    return float(dm.values[y0:y1, x0:x1].mean())


def inverse_distance_weight(r, r_max):
    return 1.0 / (1.0 + r)


def linear_taper_weight(r, r_max):
    return (r_max - r + 1.0) / (r_max + 1.0)


WEIGHT_FUNCTIONS = {"inverse": inverse_distance_weight, "linear": linear_taper_weight}


def radial_distances(box: BoundingBox, dm: DepthMap):
    x0, x1, y0, y1 = _box_pixels(dm, box)
    cx, cy = box.centroid
    xs = np.arange(x0, x1) + 0.5 - cx
    ys = np.arange(y0, y1) + 0.5 - cy
    return np.hypot(xs[None, :], ys[:, None]), (x0, x1, y0, y1)


def rwa_depth(dm: DepthMap, box: BoundingBox, weight: Union[str, Callable] = "inverse") -> float:
    """Radially weighted average: pixels near the box centroid count more.

    ``weight(r, r_max)`` maps each pixel's distance ``r`` from the centroid to
    a strictly positive weight; the default is ``1 / (1 + r)``.
    """
    fn = WEIGHT_FUNCTIONS[weight] if isinstance(weight, str) else weight
    r, (x0, x1, y0, y1) = radial_distances(box, dm)
    w = fn(r, r.max())
    if np.any(w <= 0):
        raise ValueError("radial weights must be strictly positive")
    return float(np.sum(w * dm.values[y0:y1, x0:x1]) / np.sum(w))


@dataclass(frozen=True)
class ObjectDepthEstimate:
    mean_depth: float
    rwa_depth: float
    pixel_count: int


def estimate_object_depth(dm: DepthMap, box: BoundingBox, weight="inverse") -> ObjectDepthEstimate:
    x0, x1, y0, y1 = _box_pixels(dm, box)
    return ObjectDepthEstimate(mean_depth(dm, box), rwa_depth(dm, box, weight), (x1 - x0) * (y1 - y0))


def rescale_per_image(values: Sequence[float], invert: bool) -> np.ndarray:
    """Min-max map one image's object depths onto the 1..100 annotation scale.

    With ``invert`` (disparity input, larger = nearer) values are negated
    first so the nearest object maps to 1. A single object, or objects that
    all share one value, map to 50.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one object depth")
    if invert:
        v = -v
    lo, hi = v.min(), v.max()
    # spreads at round-off level (e.g. means of a constant map) count as equal
    if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        return np.full(v.shape, MIDPOINT_DEPTH)
    return SCALE_MIN + (SCALE_MAX - SCALE_MIN) * (v - lo) / (hi - lo)


def relative_from_continuous(d1: float, d2: float, threshold: float) -> int:
    return derive_class(d1, d2, threshold)


# ---------------------------------------------------------------------------
# agreement


@dataclass(frozen=True)
class AgreementScore:
    accuracy: float
    pair_count: int
    confusion: np.ndarray


def agreement(a, b, n_classes: int = 3) -> AgreementScore:
    """Fraction of pairs on which two label sources give the same class."""
    a, b = np.asarray(a, dtype=int), np.asarray(b, dtype=int)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)} labels")
    if a.size == 0:
        raise ValueError("agreement of empty label lists is undefined")
    conf = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(conf, (a, b), 1)
    return AgreementScore(float(np.trace(conf) / conf.sum()), int(a.size), conf)


AGGREGATORS = ("mean", "rwa")


def image_object_depths(rec: ImageRecord, dm: DepthMap, weight="inverse") -> Dict[str, Dict[str, float]]:
    """Rescaled mean and RWA depth of every object in one image, keyed by aggregator then object id."""
    dm.check_dims(rec.dims)
    estimates = [estimate_object_depth(dm, o.box, weight) for o in rec.objects]
    ids = [o.object_id for o in rec.objects]
    return {
        "mean": dict(zip(ids, rescale_per_image([e.mean_depth for e in estimates], dm.invert))),
        "rwa": dict(zip(ids, rescale_per_image([e.rwa_depth for e in estimates], dm.invert))),
    }


def predictor_classes(
    records: Sequence[ImageRecord], maps: Mapping[str, DepthMap], threshold: float, weight="inverse"
) -> Dict[str, np.ndarray]:
    """Relative-depth classes implied by the depth maps for every valid pair.

    The classes are aligned with ``build_pairs(records, threshold)``.
    """
    out: Dict[str, List[int]] = {agg: [] for agg in AGGREGATORS}
    by_id = {r.image_id: r for r in records}
    depths = {}
    for pair in build_pairs(records, threshold):
        if pair.image_id not in depths:
            if pair.image_id not in maps:
                raise DepthMapError(f"no depth map for image {pair.image_id!r}")
            depths[pair.image_id] = image_object_depths(by_id[pair.image_id], maps[pair.image_id], weight)
        per_image = depths[pair.image_id]
        for agg in AGGREGATORS:
            d = per_image[agg]
            out[agg].append(relative_from_continuous(d[pair.obj1.object_id], d[pair.obj2.object_id], threshold))
    return {agg: np.array(v, dtype=int) for agg, v in out.items()}


def human_agreement_table(
    records: Sequence[ImageRecord], maps: Mapping[str, DepthMap], thresholds=(0, 1, 5), weight="inverse"
) -> Dict[str, Dict[float, AgreementScore]]:
    """Agreement of depth-map derived classes with the human annotations.

    Returns ``{aggregator: {threshold: AgreementScore}}``.
    """
    table: Dict[str, Dict[float, AgreementScore]] = {agg: {} for agg in AGGREGATORS}
    for t in thresholds:
        human = np.array([p.relative_class for p in build_pairs(records, t)], dtype=int)
        predicted = predictor_classes(records, maps, t, weight)
        for agg in AGGREGATORS:
            table[agg][t] = agreement(human, predicted[agg])
    return table
