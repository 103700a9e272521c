"""Annotated images, ordered object pairs and relative-depth labels.

Depth scores follow the annotation scale: integers from 1 (nearest,
foreground) to 100 (farthest, background). An object whose depth was not
annotated carries ``depth=None``.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .geometry import BoundingBox, ImageDims

logger = logging.getLogger(__name__)

IN_FRONT, EQUAL, BEHIND = 0, 1, 2
CLASSES = (IN_FRONT, EQUAL, BEHIND)
CLASS_NAMES = {IN_FRONT: "in_front", EQUAL: "equal", BEHIND: "behind"}

# A smaller depth score means the object is nearer to the camera. Flip to
# False if a dataset uses the opposite polarity.
SMALLER_DEPTH_IS_NEARER = True

DEPTH_MIN, DEPTH_MAX = 1, 100
UNSPECIFIED = "Unspecified"

STANDARD_THRESHOLDS = (0, 2, 5, 10)
IMBALANCE_PRONE_THRESHOLD = 5

VOC_CATEGORIES = (
    "aeroplane", "bicycle", "bird", "boat", "bottle", "bus", "car", "cat",
    "chair", "cow", "diningtable", "dog", "horse", "motorbike", "person",
    "pottedplant", "sheep", "sofa", "train", "tvmonitor",
)

_LABEL_ALIASES = {
    "dining table": "diningtable",
    "potted plant": "pottedplant",
    "tv/monitor": "tvmonitor",
    "tv monitor": "tvmonitor",
    "tv": "tvmonitor",
    "airplane": "aeroplane",
    "motorcycle": "motorbike",
}


def normalize_label(label: str) -> str:
    key = label.strip().lower()
    return _LABEL_ALIASES.get(key, key)


class AnnotationError(ValueError):
    """Raised when an annotation document violates the schema."""

    def __init__(self, message, image_id=None, field=None):
        self.image_id = image_id
        self.field = field
        where = []
        if image_id is not None:
            where.append(f"image {image_id!r}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass(frozen=True)
class ObjectAnnotation:
    object_id: str
    label: str
    box: BoundingBox
    depth: Optional[int] = None
    pose: str = UNSPECIFIED
    occluded: bool = False
    truncated: bool = False
    difficult: bool = False

    @property
    def has_depth(self) -> bool:
        return self.depth is not None


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    dims: ImageDims
    objects: Tuple[ObjectAnnotation, ...]
    scene_label: str = "unknown"
    scene_confidence: Optional[float] = None

    def __post_init__(self):
        if not self.objects:
            raise AnnotationError("image has no objects", self.image_id, "objects")
        object.__setattr__(self, "objects", tuple(self.objects))


@dataclass(frozen=True)
class PairInstance:
    image_id: str
    obj1: ObjectAnnotation
    obj2: ObjectAnnotation
    relative_class: int
    dims: ImageDims
    scene_label: str = "unknown"
    scene_confidence: Optional[float] = None

    def __post_init__(self):
        if self.obj1.object_id == self.obj2.object_id:
            raise ValueError(f"self-pair on object {self.obj1.object_id!r} in image {self.image_id!r}")


def derive_class(d1: float, d2: float, threshold: float) -> int:
    """Three-way relative depth of object 1 with respect to object 2.

    Returns 1 when ``|d1 - d2| <= threshold``; otherwise 0 if object 1 is
    nearer and 2 if it is farther. Works for integer scores and for real
    values on the same scale.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    if abs(d1 - d2) <= threshold:
        return EQUAL
    nearer = d1 < d2 if SMALLER_DEPTH_IS_NEARER else d1 > d2
    return IN_FRONT if nearer else BEHIND


def generate_pairs(rec: ImageRecord) -> List[Tuple[ObjectAnnotation, ObjectAnnotation]]:
    """All n(n-1) ordered pairs of distinct objects, sorted by object id."""
    objs = sorted(rec.objects, key=lambda o: o.object_id)
    return [(a, b) for a in objs for b in objs if a.object_id != b.object_id]


def filter_valid(pairs: Iterable[Tuple[ObjectAnnotation, ObjectAnnotation]]):
    return [(a, b) for a, b in pairs if a.has_depth and b.has_depth]


def build_pairs(records: Sequence[ImageRecord], threshold: float) -> List[PairInstance]:
    """Generate, filter and label the pairs of every record at ``threshold``."""
    out = []
    for rec in records:
        for a, b in filter_valid(generate_pairs(rec)):
            out.append(
                PairInstance(
                    image_id=rec.image_id,
                    obj1=a,
                    obj2=b,
                    relative_class=derive_class(a.depth, b.depth, threshold),
                    dims=rec.dims,
                    scene_label=rec.scene_label,
                    scene_confidence=rec.scene_confidence,
                )
            )
    return out


@dataclass
class ClassDistribution:
    counts: Dict[int, int]
    total: int
    fractions: Optional[Dict[int, float]] = field(default=None)

    @property
    def fractions_defined(self) -> bool:
        return self.fractions is not None


def class_distribution(labels) -> ClassDistribution:
    """Per-class counts and fractions of a list of pairs or raw labels."""
    labels = [p.relative_class if isinstance(p, PairInstance) else int(p) for p in labels]
    counter = Counter(labels)
    counts = {c: counter.get(c, 0) for c in CLASSES}
    total = len(labels)
    if total == 0:
        return ClassDistribution(counts, 0, None)
    return ClassDistribution(counts, total, {c: n / total for c, n in counts.items()})


# ---------------------------------------------------------------------------
# Annotation file I/O


def _require(obj, key, image_id, field_path):
    if key not in obj:
        raise AnnotationError("missing required field", image_id, field_path)
    return obj[key]


def _parse_depth(raw, image_id, field_path, lenient):
    if raw is None or (isinstance(raw, str) and raw.strip().lower() == UNSPECIFIED.lower()):
        return None
    if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
        raise AnnotationError(f"depth must be an integer or {UNSPECIFIED!r}, got {raw!r}", image_id, field_path)
    try:
        value = float(raw)
    except ValueError:
        raise AnnotationError(f"depth must be an integer or {UNSPECIFIED!r}, got {raw!r}", image_id, field_path)
    if value != int(value):
        raise AnnotationError(f"depth must be an integer, got {raw!r}", image_id, field_path)
    value = int(value)
    if lenient and value == 0:
        logger.info("image %s: %s depth 0 clamped to %d", image_id, field_path, DEPTH_MIN)
        return DEPTH_MIN
    if not DEPTH_MIN <= value <= DEPTH_MAX:
        raise AnnotationError(f"depth {value} outside [{DEPTH_MIN}, {DEPTH_MAX}]", image_id, field_path)
    return value


def _parse_bool(raw, image_id, field_path):
    if isinstance(raw, bool):
        return raw
    if raw in (0, 1):
        return bool(raw)
    raise AnnotationError(f"expected boolean, got {raw!r}", image_id, field_path)


def parse_record(doc: dict, categories=VOC_CATEGORIES, lenient: bool = False) -> ImageRecord:
    image_id = str(_require(doc, "id", None, "id"))
    try:
        dims = ImageDims(_require(doc, "width", image_id, "width"), _require(doc, "height", image_id, "height"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, AnnotationError):
            raise
        raise AnnotationError(str(exc), image_id, "width/height") from exc
    allowed = None if categories is None else set(categories)

    objects = []
    for i, obj in enumerate(_require(doc, "objects", image_id, "objects")):
        prefix = f"objects[{i}]"
        object_id = str(_require(obj, "id", image_id, f"{prefix}.id"))
        label = normalize_label(str(_require(obj, "label", image_id, f"{prefix}.label")))
        if allowed is not None and label not in allowed:
            raise AnnotationError(f"unknown category {label!r}", image_id, f"{prefix}.label")
        raw_box = _require(obj, "box", image_id, f"{prefix}.box")
        try:
            box = BoundingBox(*(raw_box[k] for k in ("x_min", "y_min", "x_max", "y_max")))
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationError(f"invalid box {raw_box!r}: {exc}", image_id, f"{prefix}.box") from exc
        if not box.fits_in(dims):
            raise AnnotationError(f"box {box.as_tuple()} exceeds image bounds", image_id, f"{prefix}.box")
        objects.append(
            ObjectAnnotation(
                object_id=object_id,
                label=label,
                box=box,
                depth=_parse_depth(obj.get("depth"), image_id, f"{prefix}.depth", lenient),
                pose=str(obj.get("pose", UNSPECIFIED)),
                occluded=_parse_bool(obj.get("occluded", False), image_id, f"{prefix}.occluded"),
                truncated=_parse_bool(obj.get("truncated", False), image_id, f"{prefix}.truncated"),
                difficult=_parse_bool(obj.get("difficult", False), image_id, f"{prefix}.difficult"),
            )
        )
    if len({o.object_id for o in objects}) != len(objects):
        raise AnnotationError("duplicate object ids", image_id, "objects")

    confidence = doc.get("scene_confidence")
    if confidence is not None:
        confidence = float(confidence)
        if not 0.0 <= confidence <= 1.0:
            raise AnnotationError(f"scene_confidence {confidence} outside [0, 1]", image_id, "scene_confidence")
    return ImageRecord(
        image_id=image_id,
        dims=dims,
        objects=tuple(objects),
        scene_label=str(doc.get("scene_label", "unknown")),
        scene_confidence=confidence,
    )


def parse_annotations(path, categories=VOC_CATEGORIES, lenient: bool = False) -> List[ImageRecord]:
    """Read an annotation document (JSON) into image records.

    Parameters
    ----------
    path : str or Path
        JSON file with a top-level ``images`` list.
    categories : sequence of str or None
        Allowed object labels; ``None`` disables the check.
    lenient : bool
        Accept depth 0 and clamp it to 1 instead of rejecting it.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        raise AnnotationError(f"{path}: expected an object with an 'images' list", field="images")
    records = [parse_record(img, categories=categories, lenient=lenient) for img in doc["images"]]
    ids = [r.image_id for r in records]
    if len(set(ids)) != len(ids):
        raise AnnotationError(f"{path}: duplicate image ids", field="id")
    return records


def record_to_dict(rec: ImageRecord) -> dict:
    doc = {
        "id": rec.image_id,
        "width": rec.dims.width,
        "height": rec.dims.height,
        "scene_label": rec.scene_label,
        "objects": [
            {
                "id": o.object_id,
                "label": o.label,
                "box": dict(zip(("x_min", "y_min", "x_max", "y_max"), o.box.as_tuple())),
                "depth": UNSPECIFIED if o.depth is None else o.depth,
                "pose": o.pose,
                "occluded": o.occluded,
                "truncated": o.truncated,
                "difficult": o.difficult,
            }
            for o in rec.objects
        ],
    }
    if rec.scene_confidence is not None:
        doc["scene_confidence"] = rec.scene_confidence
    return doc


def write_annotations(records: Sequence[ImageRecord], path) -> None:
    Path(path).write_text(json.dumps({"images": [record_to_dict(r) for r in records]}, indent=1))
