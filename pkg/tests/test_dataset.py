import copy
import json
import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reldepth.dataset import (
    BEHIND,
    EQUAL,
    IN_FRONT,
    STANDARD_THRESHOLDS,
    VOC_CATEGORIES,
    AnnotationError,
    ImageRecord,
    PairInstance,
    build_pairs,
    class_distribution,
    derive_class,
    filter_valid,
    generate_pairs,
    normalize_label,
    parse_annotations,
    write_annotations,
)
from reldepth.geometry import ImageDims

from conftest import make_object


def record(*objects, image_id="im"):
    return ImageRecord(image_id, ImageDims(100, 100), tuple(objects), "street", None)


class TestParseAnnotations:
    def test_counts_preserved(self, annotation_file):
        records = parse_annotations(annotation_file)
        assert len(records) == 2
        assert sum(len(r.objects) for r in records) == 6

    def test_unspecified_depth(self, annotation_file):
        rec = parse_annotations(annotation_file)[0]
        by_id = {o.object_id: o for o in rec.objects}
        assert by_id["c"].depth is None
        assert by_id["a"].depth == 20

    def test_defaults_and_fields(self, annotation_file):
        rec = parse_annotations(annotation_file)[1]
        assert rec.scene_confidence is None
        q = [o for o in rec.objects if o.object_id == "q"][0]
        assert q.pose == "Unspecified" and q.occluded is False

    @pytest.mark.parametrize("depth", [0, 101, -3, 2.5, "deep", True])
    def test_bad_depth(self, tmp_path, two_image_doc, depth):
        two_image_doc["images"][1]["objects"][0]["depth"] = depth
        path = tmp_path / "a.json"
        path.write_text(json.dumps(two_image_doc))
        with pytest.raises(AnnotationError) as err:
            parse_annotations(path)
        assert err.value.image_id == "img2"
        assert "depth" in err.value.field

    def test_lenient_clamps_zero(self, tmp_path, two_image_doc):
        two_image_doc["images"][1]["objects"][0]["depth"] = 0
        path = tmp_path / "a.json"
        path.write_text(json.dumps(two_image_doc))
        rec = parse_annotations(path, lenient=True)[1]
        assert rec.objects[0].depth == 1

    @pytest.mark.parametrize(
        "mutate, field",
        [
            (lambda d: d["images"][0]["objects"][0].pop("box"), "objects[0].box"),
            (lambda d: d["images"][0]["objects"][0].update(label="unicorn"), "objects[0].label"),
            (lambda d: d["images"][0]["objects"][1]["box"].update(x_max=500), "objects[1].box"),
            (lambda d: d["images"][0]["objects"][1]["box"].update(x_max=10), "objects[1].box"),
            (lambda d: d["images"][0].update(width=0), "width/height"),
            (lambda d: d["images"][0].update(scene_confidence=1.5), "scene_confidence"),
            (lambda d: d["images"][0]["objects"][2].update(id="a"), "objects"),
            (lambda d: d["images"][0]["objects"][2].update(occluded="yes"), "objects[2].occluded"),
        ],
    )
    def test_schema_errors_name_image_and_field(self, tmp_path, two_image_doc, mutate, field):
        doc = copy.deepcopy(two_image_doc)
        mutate(doc)
        path = tmp_path / "a.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(AnnotationError) as err:
            parse_annotations(path)
        assert err.value.image_id == "img1"
        assert err.value.field == field

    def test_not_json(self, tmp_path):
        path = tmp_path / "a.json"
        path.write_text("{images: ")
        with pytest.raises(AnnotationError):
            parse_annotations(path)

    def test_duplicate_image_ids(self, tmp_path, two_image_doc):
        two_image_doc["images"][1]["id"] = "img1"
        path = tmp_path / "a.json"
        path.write_text(json.dumps(two_image_doc))
        with pytest.raises(AnnotationError, match="duplicate"):
            parse_annotations(path)

    def test_round_trip(self, tmp_path, annotation_file):
        records = parse_annotations(annotation_file)
        out = tmp_path / "b.json"
        write_annotations(records, out)
        assert parse_annotations(out) == records

    def test_label_aliases(self):
        assert normalize_label("Dining Table") == "diningtable"
        assert normalize_label("TV/monitor") == "tvmonitor"
        assert len(VOC_CATEGORIES) == 20


class TestPairs:
    def test_three_objects_six_pairs(self):
        rec = record(*(make_object(i, (0, 0, 5, 5), 10) for i in "abc"))
        pairs = generate_pairs(rec)
        assert len(pairs) == 6
        assert all(a.object_id != b.object_id for a, b in pairs)

    def test_one_object_no_pairs(self):
        assert generate_pairs(record(make_object("a", (0, 0, 5, 5), 10))) == []

    def test_two_objects_both_orders(self):
        a, b = make_object("A", (0, 0, 5, 5), 1), make_object("B", (1, 1, 5, 5), 2)
        pairs = generate_pairs(record(b, a))
        assert [(x.object_id, y.object_id) for x, y in pairs] == [("A", "B"), ("B", "A")]

    @given(st.integers(1, 8))
    def test_pair_count(self, n):
        rec = record(*(make_object(f"o{i}", (0, 0, 5, 5), 10) for i in range(n)))
        assert len(generate_pairs(rec)) == n * (n - 1)

    def test_filter_valid(self):
        a = make_object("a", (0, 0, 5, 5), 10)
        b = make_object("b", (0, 0, 5, 5), None)
        c = make_object("c", (0, 0, 5, 5), 30)
        pairs = generate_pairs(record(a, b, c))
        kept = filter_valid(pairs)
        assert [(x.object_id, y.object_id) for x, y in kept] == [("a", "c"), ("c", "a")]
        assert filter_valid(kept) == kept
        assert filter_valid([]) == []

    def test_self_pair_rejected(self):
        a = make_object("a", (0, 0, 5, 5), 10)
        with pytest.raises(ValueError):
            PairInstance("im", a, a, 1, ImageDims(10, 10))

    def test_build_pairs_labels(self, annotation_file):
        records = parse_annotations(annotation_file)
        pairs = build_pairs(records, 0)
        # img1: 6 raw, 2 valid (c is unspecified); img2: 6 valid
        assert len(pairs) == 8
        for p in pairs:
            assert p.relative_class == derive_class(p.obj1.depth, p.obj2.depth, 0)
        q_vs_p = [p for p in build_pairs(records, 2) if (p.obj1.object_id, p.obj2.object_id) == ("q", "p")][0]
        assert q_vs_p.relative_class == EQUAL


class TestDeriveClass:
    def test_examples(self):
        assert derive_class(30, 30, 0) == EQUAL
        assert derive_class(20, 50, 2) == IN_FRONT
        assert derive_class(50, 49, 2) == EQUAL
        assert derive_class(50, 49, 0) == BEHIND

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            derive_class(1, 2, -1)

    def test_antisymmetry_exhaustive(self):
        flip = {IN_FRONT: BEHIND, EQUAL: EQUAL, BEHIND: IN_FRONT}
        for t in STANDARD_THRESHOLDS:
            for d1, d2 in itertools.product(range(1, 101), repeat=2):
                assert derive_class(d2, d1, t) == flip[derive_class(d1, d2, t)]

    @given(st.integers(1, 100), st.integers(1, 100))
    def test_threshold_monotonicity(self, d1, d2):
        equal_at = [derive_class(d1, d2, t) == EQUAL for t in range(0, 101)]
        first = equal_at.index(True)
        assert all(equal_at[first:])


class TestClassDistribution:
    def test_counts(self):
        dist = class_distribution([0, 1, 2, 1])
        assert dist.counts == {0: 1, 1: 2, 2: 1}
        assert sum(dist.fractions.values()) == pytest.approx(1, abs=1e-12)

    def test_all_equal(self):
        assert class_distribution([1, 1, 1]).fractions[1] == 1.0

    def test_empty(self):
        dist = class_distribution([])
        assert dist.counts == {0: 0, 1: 0, 2: 0}
        assert not dist.fractions_defined

    def test_neutral_count_non_decreasing_in_threshold(self, small_records):
        counts = [class_distribution(build_pairs(small_records, t)).counts[EQUAL] for t in range(0, 40)]
        assert counts == sorted(counts)
