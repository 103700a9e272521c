"""Synthetic annotated scenes with a known depth rule.

Every image holds two objects standing on one of three ground "rows"
(far, middle, near). Nearer rows sit lower in the frame and hold larger
boxes. Two labelling modes are available:

``depth_from="geometry"``
    The depth score is a fixed function of each box's bottom edge and
    area, so the geometric features determine the class exactly.
``depth_from="row"``
    The depth score is the latent row; geometry, object labels and
    perceptual flags are independent noisy views of it.
"""
from __future__ import annotations

import math
from typing import Dict, List, Mapping, Sequence

import numpy as np

from .dataset import VOC_CATEGORIES, ImageRecord, ObjectAnnotation, derive_class
from .depthmap import DepthMap
from .geometry import BoundingBox, ImageDims

ROW_DEPTHS = (80, 50, 20)  # far, middle, near
_ROW_BOTTOM = (0.45, 0.68, 0.92)  # box bottom edge as a fraction of image height
_ROW_HEIGHT = (0.14, 0.26, 0.42)  # box height as a fraction of image height

ROW_CATEGORIES = (
    ("aeroplane", "boat", "bus", "train", "pottedplant"),
    ("car", "cow", "horse", "sheep", "bicycle"),
    ("person", "dog", "cat", "chair", "bottle"),
)
POSES = ("Frontal", "Left", "Rear", "Right", "Unspecified")
SCENES = ("street", "field", "kitchen", "beach", "living_room", "harbor")


def depth_score(box: BoundingBox, dims: ImageDims) -> float:
    """0 for far-looking boxes, about 1 for near ones: low in frame and large."""
    return 0.7 * box.y_max / dims.height + 0.3 * math.sqrt(box.area / dims.area)


def _score_cutpoints():
    # typical frame aspect H/W = 0.75 and near-square boxes
    centres = [0.7 * b + 0.3 * h * math.sqrt(0.75) for b, h in zip(_ROW_BOTTOM, _ROW_HEIGHT)]
    return (centres[0] + centres[1]) / 2, (centres[1] + centres[2]) / 2


SCORE_CUTPOINTS = _score_cutpoints()


def geometric_depth(box: BoundingBox, dims: ImageDims) -> int:
    """Depth score (1..100) that the geometry-driven mode assigns to a box."""
    s = depth_score(box, dims)
    row = 0 if s < SCORE_CUTPOINTS[0] else (1 if s < SCORE_CUTPOINTS[1] else 2)
    return ROW_DEPTHS[row]


def _draw_box(rng, row, dims, jitter):
    H, W = dims.height, dims.width
    bottom = np.clip(_ROW_BOTTOM[row] + jitter * rng.normal(), 0.2, 1.0) * H
    height = _ROW_HEIGHT[row] * rng.uniform(0.85, 1.15) * H
    width = min(height * rng.uniform(0.9, 1.1), 0.9 * W)
    y_max = int(round(bottom))
    y_min = max(0, int(round(bottom - height)))
    if y_max - y_min < 2:
        y_min = y_max - 2
    x_min = int(rng.integers(0, max(1, int(W - width))))
    x_max = min(W, x_min + max(2, int(round(width))))
    return BoundingBox(x_min, y_min, x_max, y_max)


def _view(rng, true_value, choices, informativeness):
    # with probability `informativeness` reveal the truth, else draw at random
    return true_value if rng.random() < informativeness else choices[rng.integers(len(choices))]


def make_synthetic_records(
    n_images: int = 1000,
    seed: int = 0,
    label_noise: float = 0.05,
    depth_from: str = "geometry",
    geo_jitter: float = 0.01,
    geo_informativeness: float = 1.0,
    sem_informativeness: float = 0.0,
    per_informativeness: float = 0.0,
    noise_threshold: float = 0,
) -> List[ImageRecord]:
    """Generate ``n_images`` two-object images (``2 * n_images`` ordered pairs).

    Parameters
    ----------
    label_noise : float
        Fraction of images whose second object gets a depth producing a
        wrong class (at ``noise_threshold``) for both pair orders.
    depth_from : {"geometry", "row"}
    geo_jitter : float
        Standard deviation of the box bottom edge around its row, as a
        fraction of image height.
    geo_informativeness, sem_informativeness, per_informativeness : float
        Probability that an object's box placement (resp. label,
        occlusion/truncation flags) reflects its row rather than a random
        one. Box placement is only decoupled from depth when
        ``depth_from="row"``.
    """
    if depth_from not in ("geometry", "row"):
        raise ValueError(f"depth_from must be 'geometry' or 'row', got {depth_from!r}")
    rng = np.random.default_rng(seed)
    noisy = set(rng.choice(n_images, size=int(round(label_noise * n_images)), replace=False).tolist())
    records = []
    for i in range(n_images):
        dims = ImageDims(int(rng.integers(400, 641)), int(rng.integers(300, 481)))
        objects = []
        for j in range(2):
            row = int(rng.integers(3))
            box_row = row if depth_from == "geometry" else _view(rng, row, (0, 1, 2), geo_informativeness)
            box = _draw_box(rng, box_row, dims, geo_jitter)
            depth = geometric_depth(box, dims) if depth_from == "geometry" else ROW_DEPTHS[row]
            row_label = ROW_CATEGORIES[row][rng.integers(len(ROW_CATEGORIES[row]))]
            label = _view(rng, row_label, VOC_CATEGORIES, sem_informativeness)
            occluded = _view(rng, row == 0, (False, True), per_informativeness)
            truncated = _view(rng, row == 2, (False, True), per_informativeness)
            objects.append(
                ObjectAnnotation(
                    object_id=f"o{j}",
                    label=label,
                    box=box,
                    depth=depth,
                    pose=POSES[rng.integers(len(POSES))],
                    occluded=bool(occluded),
                    truncated=bool(truncated),
                    difficult=bool(rng.random() < 0.1),
                )
            )
        if i in noisy:
            objects[1] = _corrupt(rng, objects[0], objects[1], noise_threshold)
        records.append(
            ImageRecord(
                image_id=f"syn{i:05d}",
                dims=dims,
                objects=tuple(objects),
                scene_label=SCENES[rng.integers(len(SCENES))],
                scene_confidence=float(rng.uniform(0.3, 1.0)),
            )
        )
    return records


def _corrupt(rng, a: ObjectAnnotation, b: ObjectAnnotation, threshold) -> ObjectAnnotation:
    true_class = derive_class(a.depth, b.depth, threshold)
    wrong = [c for c in (0, 1, 2) if c != true_class][rng.integers(2)]
    gap = int(threshold) + 5
    new_depth = {0: a.depth + gap, 1: a.depth, 2: a.depth - gap}[wrong]
    return ObjectAnnotation(
        b.object_id, b.label, b.box, int(np.clip(new_depth, 1, 100)), b.pose, b.occluded, b.truncated, b.difficult
    )


def make_synthetic_depth_maps(
    records: Sequence[ImageRecord], seed: int = 0, noise: float = 0.0, as_disparity: bool = True
) -> Dict[str, DepthMap]:
    """Render a depth (or disparity) map per image from the annotated depths.

    The background recedes towards the top of the frame; objects are painted
    far to near with their annotated depth, plus Gaussian pixel noise.
    """
    rng = np.random.default_rng(seed)
    maps = {}
    for rec in records:
        W, H = int(rec.dims.width), int(rec.dims.height)
        rows = np.linspace(100.0, 10.0, H)[:, None]
        depth = np.repeat(rows, W, axis=1)
        for obj in sorted(rec.objects, key=lambda o: -(o.depth or 100)):
            if obj.depth is None:
                continue
            x0, y0, x1, y1 = (int(v) for v in obj.box.as_tuple())
            depth[y0:y1, x0:x1] = obj.depth
        if noise:
            depth = np.clip(depth + noise * rng.normal(size=depth.shape), 1.0, None)
        values = 100.0 / depth if as_disparity else depth
        maps[rec.image_id] = DepthMap(values, invert=as_disparity)
    return maps


def constant_depth_maps(records: Sequence[ImageRecord], value: float = 1.0) -> Mapping[str, DepthMap]:
    return {r.image_id: DepthMap(np.full((int(r.dims.height), int(r.dims.width)), value)) for r in records}
