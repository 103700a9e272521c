import json

import numpy as np
import pytest

from reldepth.dataset import ImageRecord, ObjectAnnotation
from reldepth.geometry import BoundingBox, ImageDims


def make_object(oid, box, depth, label="person", pose="Frontal", occluded=False, truncated=False, difficult=False):
    return ObjectAnnotation(oid, label, BoundingBox(*box), depth, pose, occluded, truncated, difficult)


@pytest.fixture
def two_image_doc():
    """Two images, three objects each; one depth left unspecified."""
    return {
        "images": [
            {
                "id": "img1",
                "width": 100,
                "height": 80,
                "scene_label": "street",
                "scene_confidence": 0.8,
                "objects": [
                    {"id": "a", "label": "person", "box": {"x_min": 10, "y_min": 20, "x_max": 30, "y_max": 70},
                     "depth": 20, "pose": "Frontal", "occluded": False, "truncated": False, "difficult": False},
                    {"id": "b", "label": "car", "box": {"x_min": 40, "y_min": 30, "x_max": 90, "y_max": 60},
                     "depth": 50, "pose": "Left", "occluded": True, "truncated": False, "difficult": False},
                    {"id": "c", "label": "dog", "box": {"x_min": 0, "y_min": 50, "x_max": 20, "y_max": 80},
                     "depth": "Unspecified", "pose": "Unspecified", "occluded": False, "truncated": True,
                     "difficult": False},
                ],
            },
            {
                "id": "img2",
                "width": 64,
                "height": 48,
                "scene_label": "kitchen",
                "objects": [
                    {"id": "p", "label": "bottle", "box": {"x_min": 5, "y_min": 5, "x_max": 15, "y_max": 30},
                     "depth": 10, "pose": "Frontal"},
                    {"id": "q", "label": "chair", "box": {"x_min": 20, "y_min": 10, "x_max": 50, "y_max": 45},
                     "depth": 11},
                    {"id": "r", "label": "diningtable", "box": {"x_min": 10, "y_min": 20, "x_max": 60, "y_max": 48},
                     "depth": 40, "difficult": True},
                ],
            },
        ]
    }


@pytest.fixture
def annotation_file(tmp_path, two_image_doc):
    path = tmp_path / "annotations.json"
    path.write_text(json.dumps(two_image_doc))
    return path


@pytest.fixture
def small_records():
    from reldepth.synthetic import make_synthetic_records

    return make_synthetic_records(60, seed=3)


def random_box(rng, size=64):
    x0, x1 = sorted(rng.choice(size + 1, 2, replace=False))
    y0, y1 = sorted(rng.choice(size + 1, 2, replace=False))
    return BoundingBox(int(x0), int(y0), int(x1), int(y1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = ["make_object", "random_box", "ImageRecord", "ImageDims"]


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
