import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reldepth.geometry import (
    GEOMETRIC_FEATURE_NAMES,
    OFFSET_RATIO_FEATURES,
    UNIT_INTERVAL_FEATURES,
    BoundingBox,
    ImageDims,
    extract_geometric_features,
    intersection_area,
    min_box_distance,
    union_box,
)

from conftest import random_box

B = BoundingBox
IMG = ImageDims(64, 64)


@st.composite
def boxes(draw, size=64):
    x0, x1 = sorted(draw(st.lists(st.integers(0, size), min_size=2, max_size=2, unique=True)))
    y0, y1 = sorted(draw(st.lists(st.integers(0, size), min_size=2, max_size=2, unique=True)))
    return B(x0, y0, x1, y1)


def raster(box, size=64):
    grid = np.zeros((size, size), dtype=bool)
    grid[int(box.y_min):int(box.y_max), int(box.x_min):int(box.x_max)] = True
    return grid


def boundary_points(box, step=0.005):
    xs = np.arange(box.x_min, box.x_max + step / 2, step)
    ys = np.arange(box.y_min, box.y_max + step / 2, step)
    top = np.c_[xs, np.full_like(xs, box.y_min)]
    bottom = np.c_[xs, np.full_like(xs, box.y_max)]
    left = np.c_[np.full_like(ys, box.x_min), ys]
    right = np.c_[np.full_like(ys, box.x_max), ys]
    return np.vstack([top, bottom, left, right])


def sampled_distance(a, b):
    # closest points of two disjoint rectangles lie on their boundaries;
    # clamp each sampled point of `a` onto `b` for the exact nearest point
    pa = boundary_points(a)
    nx = np.clip(pa[:, 0], b.x_min, b.x_max)
    ny = np.clip(pa[:, 1], b.y_min, b.y_max)
    return float(np.min(np.hypot(pa[:, 0] - nx, pa[:, 1] - ny)))


def swap_expectation(f):
    """What the features of (obj2, obj1) must be, given those of (obj1, obj2)."""
    swapped = {
        "area1_over_image": "area2_over_image",
        "area2_over_image": "area1_over_image",
        "area1_over_union": "area2_over_union",
        "area2_over_union": "area1_over_union",
        "aspect1": "aspect2",
        "aspect2": "aspect1",
        "centroid_dist_over_diag1": "centroid_dist_over_diag2",
        "centroid_dist_over_diag2": "centroid_dist_over_diag1",
    }
    inverted = {"x_min_ratio", "y_min_ratio", "x_max_ratio", "y_max_ratio", "area1_over_area2"}
    negated = {"sign_dx", "sign_dy", "dx_over_image_width", "dy_over_image_height",
               "dx_over_union_width", "dy_over_union_height", "unit_dx", "unit_dy"}
    out = {}
    for name, v in f.items():
        if name in swapped:
            out[name] = f[swapped[name]]
        elif name in inverted:
            out[name] = 1.0 / v
        elif name in negated:
            out[name] = -v
        else:
            out[name] = v
    return out


class TestBoundingBox:
    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            B(5, 0, 5, 10)
        with pytest.raises(ValueError):
            B(0, 3, 10, 2)

    def test_rejects_negative_and_nonfinite(self):
        with pytest.raises(ValueError):
            B(-1, 0, 5, 5)
        with pytest.raises(ValueError):
            B(0, 0, math.inf, 5)

    def test_properties(self):
        b = B(2, 3, 8, 11)
        assert (b.width, b.height, b.area) == (6, 8, 48)
        assert b.diagonal == 10
        assert b.centroid == (5, 7)

    def test_image_dims_positive(self):
        with pytest.raises(ValueError):
            ImageDims(0, 10)


class TestIntersection:
    @pytest.mark.parametrize(
        "a, b, expected",
        [
            ((0, 0, 10, 10), (5, 5, 15, 15), 25),
            ((0, 0, 10, 10), (0, 0, 10, 10), 100),
            ((0, 0, 10, 10), (20, 20, 30, 30), 0),
            ((0, 0, 10, 10), (10, 0, 20, 10), 0),  # touching edge
        ],
    )
    def test_examples(self, a, b, expected):
        assert intersection_area(B(*a), B(*b)) == expected

    def test_matches_rasterization(self, rng):
        for _ in range(2000):
            a, b = random_box(rng), random_box(rng)
            assert intersection_area(a, b) == np.count_nonzero(raster(a) & raster(b))

    @given(boxes(), boxes())
    def test_bounds_and_symmetry(self, a, b):
        inter = intersection_area(a, b)
        assert inter == intersection_area(b, a)
        assert 0 <= inter <= min(a.area, b.area)


class TestUnionBox:
    @pytest.mark.parametrize(
        "a, b, expected",
        [
            ((0, 0, 10, 10), (5, 5, 15, 15), (0, 0, 15, 15)),
            ((2, 3, 7, 9), (2, 3, 7, 9), (2, 3, 7, 9)),
            ((0, 0, 1, 1), (9, 9, 10, 10), (0, 0, 10, 10)),
        ],
    )
    def test_examples(self, a, b, expected):
        assert union_box(B(*a), B(*b)).as_tuple() == expected

    @given(boxes(), boxes())
    def test_encloses_both(self, a, b):
        u = union_box(a, b)
        assert u == union_box(b, a)
        for box in (a, b):
            assert u.x_min <= box.x_min and u.y_min <= box.y_min
            assert u.x_max >= box.x_max and u.y_max >= box.y_max
        # smallest: every edge is attained by one of the boxes
        assert u.x_min in (a.x_min, b.x_min) and u.x_max in (a.x_max, b.x_max)


class TestMinBoxDistance:
    @pytest.mark.parametrize(
        "a, b, expected",
        [
            ((0, 0, 10, 10), (5, 5, 15, 15), 0),
            ((0, 0, 10, 10), (13, 0, 20, 10), 3),
            ((0, 0, 10, 10), (13, 14, 20, 20), 5),
            ((0, 0, 10, 10), (10, 10, 20, 20), 0),  # corner contact
        ],
    )
    def test_examples(self, a, b, expected):
        assert min_box_distance(B(*a), B(*b)) == pytest.approx(expected)

    def test_matches_dense_boundary_sampling(self, rng):
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            d = min_box_distance(a, b)
            assert d == min_box_distance(b, a)
            if intersection_area(a, b) > 0:
                assert d == 0
            else:
                assert abs(d - sampled_distance(a, b)) <= 0.01


class TestGeometricFeatures:
    def test_feature_order_and_count(self):
        f = extract_geometric_features(B(0, 0, 4, 4), B(2, 2, 8, 8), IMG)
        assert tuple(f) == GEOMETRIC_FEATURE_NAMES
        assert len(GEOMETRIC_FEATURE_NAMES) == 32
        assert len(set(GEOMETRIC_FEATURE_NAMES)) == 32

    def test_worked_example(self):
        f = extract_geometric_features(B(10, 10, 30, 50), B(40, 10, 60, 50), ImageDims(100, 100))
        assert f["area1_over_image"] == pytest.approx(0.08)
        assert f["centroid_dist_over_image_diag"] == pytest.approx(30 / math.sqrt(20000))
        assert f["centroid_dist_over_image_diag"] == pytest.approx(0.2121, abs=1e-4)
        # cross-check the area against a pixel count
        grid = np.zeros((100, 100), bool)
        grid[10:50, 10:30] = True
        assert f["area1_over_image"] == grid.sum() / grid.size

    def test_identical_boxes(self):
        box = B(5, 5, 25, 40)
        f = extract_geometric_features(box, box, ImageDims(50, 50))
        assert f["overlap_over_min_area"] == 1
        assert f["centroid_dist_over_image_diag"] == 0
        assert (f["unit_dx"], f["unit_dy"]) == (0, 0)

    def test_disjoint_boxes_have_zero_overlap(self):
        f = extract_geometric_features(B(0, 0, 10, 10), B(20, 20, 30, 30), ImageDims(100, 100))
        for name in ("overlap_over_min_area", "overlap_over_image", "overlap_over_total_area", "overlap_over_union"):
            assert f[name] == 0

    def test_edge_boxes_are_finite(self):
        f = extract_geometric_features(B(0, 0, 1, 1), B(0, 0, 64, 64), IMG)
        assert all(math.isfinite(v) for v in f.values())

    def test_box_outside_image(self):
        with pytest.raises(ValueError, match="exceeds"):
            extract_geometric_features(B(0, 0, 65, 10), B(0, 0, 5, 5), IMG)

    def test_deterministic(self):
        a, b = B(3, 4, 20, 30), B(10, 1, 40, 22)
        assert extract_geometric_features(a, b, IMG) == extract_geometric_features(a, b, IMG)

    @settings(max_examples=300)
    @given(boxes(), boxes())
    def test_swap_symmetry(self, a, b):
        f = extract_geometric_features(a, b, IMG)
        expected = swap_expectation(f)
        g = extract_geometric_features(b, a, IMG)
        for name in GEOMETRIC_FEATURE_NAMES:
            assert g[name] == pytest.approx(expected[name], rel=1e-12, abs=1e-12), name

    @settings(max_examples=300)
    @given(boxes(), boxes(), st.floats(0.01, 100.0))
    def test_scale_invariance(self, a, b, s):
        f = extract_geometric_features(a, b, IMG)
        g = extract_geometric_features(a.scaled(s), b.scaled(s), ImageDims(64 * s, 64 * s))
        for name in GEOMETRIC_FEATURE_NAMES:
            if name in OFFSET_RATIO_FEATURES:
                continue
            assert g[name] == pytest.approx(f[name], rel=1e-9, abs=1e-9), name

    @settings(max_examples=300)
    @given(boxes(), boxes())
    def test_bounds(self, a, b):
        f = extract_geometric_features(a, b, IMG)
        assert all(math.isfinite(v) for v in f.values())
        for name in UNIT_INTERVAL_FEATURES:
            assert 0 <= f[name] <= 1, name
        norm = math.hypot(f["unit_dx"], f["unit_dy"])
        assert norm == 0 or norm == pytest.approx(1)
        assert -1 <= f["unit_dx"] <= 1 and -1 <= f["unit_dy"] <= 1
