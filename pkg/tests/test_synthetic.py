import numpy as np
import pytest

from reldepth.dataset import build_pairs, derive_class
from reldepth.synthetic import geometric_depth, make_synthetic_depth_maps, make_synthetic_records


def test_size_and_balance():
    records = make_synthetic_records(300, seed=0)
    pairs = build_pairs(records, 0)
    assert len(pairs) == 600
    counts = np.bincount([p.relative_class for p in pairs], minlength=3)
    assert counts.min() > 150


def test_label_noise_rate_matches_rule_oracle():
    """Outside the corrupted images the class follows the geometric rule exactly."""
    records = make_synthetic_records(400, seed=4, label_noise=0.05)
    wrong_images = set()
    for p in build_pairs(records, 0):
        rule = derive_class(geometric_depth(p.obj1.box, p.dims), geometric_depth(p.obj2.box, p.dims), 0)
        if rule != p.relative_class:
            wrong_images.add(p.image_id)
    assert len(wrong_images) == 20


def test_deterministic():
    assert make_synthetic_records(20, seed=9) == make_synthetic_records(20, seed=9)


def test_row_mode_validation():
    with pytest.raises(ValueError):
        make_synthetic_records(5, depth_from="magic")


def test_depth_maps_cover_images():
    records = make_synthetic_records(5, seed=1)
    maps = make_synthetic_depth_maps(records)
    for r in records:
        maps[r.image_id].check_dims(r.dims)
