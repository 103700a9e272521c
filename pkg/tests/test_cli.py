import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from reldepth import __version__
from reldepth.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, dispatch, load_config
from reldepth.dataset import EQUAL, build_pairs, parse_annotations, write_annotations
from reldepth.depthmap import write_depth_map
from reldepth.encoding import ConfigurationError
from reldepth.models import load_model
from reldepth.synthetic import constant_depth_maps, make_synthetic_records

FAST = ["--param", "rf.n_estimators=5", "--param", "nn.epochs=5", "--param", "lr.epochs=50"]


@pytest.fixture
def synth_dataset(tmp_path):
    records = make_synthetic_records(40, seed=5)
    path = tmp_path / "ann.json"
    write_annotations(records, path)
    return path, records


def write_maps(tmp_path, maps):
    (tmp_path / "maps").mkdir()
    manifest = {}
    for image_id, dm in maps.items():
        write_depth_map(dm, tmp_path / "maps" / f"{image_id}.txt")
        manifest[image_id] = f"maps/{image_id}.txt"
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


def test_version(capsys):
    assert dispatch(["version"]) == EXIT_OK
    assert __version__ in capsys.readouterr().out


def test_ingest_reports_filtering(annotation_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert dispatch(["ingest", "--dataset", str(annotation_file), "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "raw pairs: 12" in text
    assert "valid pairs: 8" in text
    summary = json.loads((out / "ingest_summary.json").read_text())
    assert summary["objects_unspecified_depth"] == 1
    assert sum(summary["class_distribution"]["0"].values()) == 8
    assert (out / "run_manifest.json").exists()


def test_usage_errors(capsys):
    assert dispatch([]) == EXIT_USAGE
    assert dispatch(["frobnicate"]) == EXIT_USAGE
    assert dispatch(["grid", "--bogus"]) == EXIT_USAGE
    assert dispatch(["grid", "--model", "svm"]) == EXIT_USAGE


def test_config_errors(tmp_path, synth_dataset, capsys):
    path, _ = synth_dataset
    assert dispatch(["grid", "--dataset", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert "dataset" in capsys.readouterr().err
    assert dispatch(["grid", "--dataset", str(path), "--folds", "1"]) == EXIT_USAGE
    assert "folds" in capsys.readouterr().err
    assert dispatch(["grid", "--dataset", str(path), "--threshold", "-1"]) == EXIT_USAGE
    assert dispatch(["grid", "--dataset", str(path), "--groups", "geo,colour"]) == EXIT_USAGE
    bad = tmp_path / "cfg.json"
    bad.write_text('{"dataset": "x", "colour": 3}')
    assert dispatch(["grid", "--config", str(bad)]) == EXIT_USAGE
    assert "colour" in capsys.readouterr().err


def test_data_error_exit_code(tmp_path, two_image_doc):
    two_image_doc["images"][0]["objects"][0]["depth"] = 101
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(two_image_doc))
    assert dispatch(["ingest", "--dataset", str(path)]) == EXIT_DATA


def test_load_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"dataset": "a.json", "thresholds": 2, "rf.n_estimators": 7, "nn.hidden_layer_sizes": [8]}))
    cfg = load_config(path)
    assert cfg.thresholds == [2]
    assert cfg.hyperparameters == {"rf": {"n_estimators": 7}, "nn": {"hidden_layer_sizes": [8]}}
    path.write_text("[1, 2]")
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_features_export(synth_dataset, tmp_path, capsys):
    path, records = synth_dataset
    out = tmp_path / "f"
    assert dispatch(["features", "--dataset", str(path), "--groups", "geo", "--groups", "sem,per", "--out", str(out)]) == 0
    geo = out / "features_Geo_T0.csv"
    with open(geo) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + len(build_pairs(records, 0))
    assert len(rows[0]) == 33
    assert (out / "features_Sem-Per_T0.csv").exists()
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["artifacts"]["features_Geo_T0.csv"] == hashlib.sha256(geo.read_bytes()).hexdigest()


def test_train_writes_loadable_model(synth_dataset, tmp_path):
    path, records = synth_dataset
    out = tmp_path / "t"
    assert dispatch(["train", "--dataset", str(path), "--groups", "geo,sem", "--model", "rf", "--out", str(out)] + FAST) == 0
    model = load_model(out / "model.json")
    pairs = build_pairs(records, 0)
    assert model.predict(pairs).shape == (len(pairs),)
    assert model.named_steps["model"].n_estimators == 5
    report = json.loads((out / "report.json").read_text())["reports"][0]
    assert report["feature_group"] == "Geo+Sem"


def test_train_rejects_multiple_specs(synth_dataset):
    path, _ = synth_dataset
    assert dispatch(["train", "--dataset", str(path), "--model", "rf", "--model", "dt"]) == EXIT_USAGE


def test_grid_full_table(synth_dataset, tmp_path, capsys):
    path, _ = synth_dataset
    out = tmp_path / "g"
    assert dispatch(["grid", "--dataset", str(path), "--out", str(out)] + FAST) == EXIT_OK
    with open(out / "grid.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 64
    acc = [float(r["MeanAccuracy"]) for r in rows]
    assert acc == sorted(acc, reverse=True)
    assert {r["Threshold"] for r in rows} == {"0", "2"}
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["seed"] == 0
    assert manifest["config"]["hyperparameters"]["rf"] == {"n_estimators": 5}
    assert set(manifest["artifacts"]) == {"grid.csv", "grid.txt", "grid.json"}


def test_grid_byte_identical(synth_dataset, tmp_path):
    path, _ = synth_dataset
    args = ["grid", "--dataset", str(path), "--groups", "geo", "--groups", "sem", "--model", "dt", "--model", "lr"] + FAST
    assert dispatch(args + ["--out", str(tmp_path / "a")]) == 0
    assert dispatch(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("grid.csv", "grid.txt", "grid.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    ma, mb = (json.loads((tmp_path / d / "run_manifest.json").read_text()) for d in "ab")
    # the manifests differ only in the output directory they echo
    assert ma["config"].pop("out") != mb["config"].pop("out")
    assert ma == mb


def test_config_file_and_overrides(synth_dataset, tmp_path):
    path, _ = synth_dataset
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dataset": str(path), "models": ["dt"], "groups": ["geo"], "thresholds": [0, 2],
                               "folds": 3, "out": str(tmp_path / "c")}))
    assert dispatch(["grid", "--config", str(cfg), "--threshold", "5"]) == 0
    with open(tmp_path / "c" / "grid.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["Threshold"] for r in rows] == ["5"]
    assert len(rows[0]["FoldAccuracies"].split(";")) == 3


def test_depth_compare_constant_maps(synth_dataset, tmp_path, capsys):
    path, records = synth_dataset
    manifest = write_maps(tmp_path, constant_depth_maps(records, 2.0))
    out = tmp_path / "d"
    rc = dispatch(["depth-compare", "--dataset", str(path), "--depth-manifest", str(manifest), "--model", "dt",
                   "--out", str(out)])
    assert rc == EXIT_OK
    doc = json.loads((out / "depth_compare.json").read_text())
    for t in ("0", "1", "5"):
        human = np.array([p.relative_class for p in build_pairs(records, float(t))])
        for agg in ("mean", "rwa"):
            entry = doc["human_agreement"][agg][t]
            assert entry["accuracy"] == pytest.approx(np.mean(human == EQUAL))
            # constant maps predict class 1 only: all mass sits in column 1
            conf = np.array(entry["confusion"])
            assert conf[:, [0, 2]].sum() == 0
    assert len(doc["model_agreement"]) == 3
    assert "Mono-Mean" in capsys.readouterr().out


def test_depth_compare_missing_map(synth_dataset, tmp_path):
    path, records = synth_dataset
    maps = dict(list(constant_depth_maps(records, 1.0).items())[:5])
    manifest = write_maps(tmp_path, maps)
    assert dispatch(["depth-compare", "--dataset", str(path), "--depth-manifest", str(manifest)]) == EXIT_DATA


def test_synth_then_ingest(tmp_path):
    out = tmp_path / "s"
    assert dispatch(["synth", "--out", str(out), "--images", "5", "--depth-maps"]) == 0
    assert len(parse_annotations(out / "annotations.json")) == 5
    assert len(json.loads((out / "depth_manifest.json").read_text())) == 5


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "reldepth.cli", "version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "reldepth" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "reldepth.cli", "grid", "--nope"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
