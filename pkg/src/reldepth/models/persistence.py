"""Versioned JSON documents for fitted estimators and pipelines.

Arrays are written as ``{"dtype", "shape", "data"}`` with ``data`` flattened
in C order. Floats go through ``repr`` so a reload reproduces every weight
bit for bit.
"""
import json
from pathlib import Path

import numpy as np
from sklearn.pipeline import Pipeline

from ..encoding import EmbeddingTable, FeatureGroup, PairFeatureExtractor, Standardizer, Vocabularies, Vocabulary
from .linear import LogisticRegression
from .neural import NeuralNetwork
from .tree import DecisionTree, RandomForest, TreeArrays

FORMAT = "reldepth-model"
VERSION = 1

_REGISTRY = {
    cls.__name__: cls
    for cls in (DecisionTree, RandomForest, LogisticRegression, NeuralNetwork, Standardizer, PairFeatureExtractor)
}


class ModelFormatError(ValueError):
    """A model document is unreadable, truncated or from another version."""


def _encode(value):
    if isinstance(value, np.ndarray):
        data = value.ravel().tolist()
        return {"__type__": "ndarray", "dtype": value.dtype.str if value.dtype != object else "object",
                "shape": list(value.shape), "data": data}
    if isinstance(value, TreeArrays):
        return {"__type__": "tree", **{k: _encode(getattr(value, k)) for k in TreeArrays.__dataclass_fields__}}
    if isinstance(value, FeatureGroup):
        return {"__type__": "group", "value": value.value}
    if isinstance(value, Vocabulary):
        return {"__type__": "vocabulary", "tokens": list(value.tokens)}
    if isinstance(value, Vocabularies):
        return {"__type__": "vocabularies", "labels": _encode(value.labels), "poses": _encode(value.poses),
                "scenes": _encode(value.scenes)}
    if isinstance(value, EmbeddingTable):
        return {"__type__": "embeddings", "vectors": {k: v.tolist() for k, v in sorted(value.vectors.items())}}
    if isinstance(value, tuple):
        return {"__type__": "tuple", "items": [_encode(v) for v in value]}
    if isinstance(value, list):
        return [_encode(v) for v in value]
    if isinstance(value, dict):
        if all(isinstance(k, str) for k in value) and "__type__" not in value:
            return {k: _encode(v) for k, v in value.items()}
        return {"__type__": "dict", "items": [[_encode(k), _encode(v)] for k, v in value.items()]}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if value is None or isinstance(value, (str, int, float, bool)):
        return value
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _decode(value):
    if isinstance(value, list):
        return [_decode(v) for v in value]
    if not isinstance(value, dict):
        return value
    tag = value.get("__type__")
    if tag is None:
        return {k: _decode(v) for k, v in value.items()}
    if tag == "ndarray":
        dtype = object if value["dtype"] == "object" else np.dtype(value["dtype"])
        arr = np.array(value["data"], dtype=dtype)
        return arr.reshape(value["shape"])
    if tag == "tree":
        return TreeArrays(**{k: _decode(value[k]) for k in TreeArrays.__dataclass_fields__})
    if tag == "group":
        return FeatureGroup(value["value"])
    if tag == "vocabulary":
        return Vocabulary(value["tokens"])
    if tag == "vocabularies":
        return Vocabularies(_decode(value["labels"]), _decode(value["poses"]), _decode(value["scenes"]))
    if tag == "embeddings":
        return EmbeddingTable({k: np.array(v) for k, v in value["vectors"].items()})
    if tag == "tuple":
        return tuple(_decode(v) for v in value["items"])
    if tag == "dict":
        return {_decode(k): _decode(v) for k, v in value["items"]}
    raise ModelFormatError(f"unknown value tag {tag!r}")


def estimator_to_dict(est) -> dict:
    if isinstance(est, Pipeline):
        return {"kind": "Pipeline", "steps": [[name, estimator_to_dict(step)] for name, step in est.steps]}
    kind = type(est).__name__
    if kind not in _REGISTRY:
        raise TypeError(f"cannot serialise estimator of type {kind}")
    fitted = {k: _encode(v) for k, v in sorted(vars(est).items()) if k.endswith("_") and not k.startswith("_")}
    if not fitted:
        raise ValueError(f"{kind} is not fitted")
    return {"kind": kind, "params": _encode(est.get_params(deep=False)), "state": fitted}


def estimator_from_dict(doc: dict):
    try:
        kind = doc["kind"]
        if kind == "Pipeline":
            return Pipeline([(name, estimator_from_dict(step)) for name, step in doc["steps"]])
        if kind not in _REGISTRY:
            raise ModelFormatError(f"unknown estimator kind {kind!r}")
        est = _REGISTRY[kind](**_decode(doc["params"]))
        for k, v in doc["state"].items():
            setattr(est, k, _decode(v))
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed model document: {exc!r}") from exc
    return est


def save_model(est, path, metadata=None) -> None:
    """Write a fitted classifier, transformer or pipeline to ``path``."""
    doc = {"format": FORMAT, "version": VERSION, "estimator": estimator_to_dict(est)}
    if metadata:
        doc["metadata"] = _encode(metadata)
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path):
    """Read an estimator written by :func:`save_model`.

    Raises
    ------
    ModelFormatError
        On truncated or corrupt files, a foreign format or another version.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a complete model document ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError(f"{path}: not a {FORMAT} document")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {doc.get('version')!r} (expected {VERSION})")
    return estimator_from_dict(doc["estimator"])


def load_metadata(path) -> dict:
    doc = json.loads(Path(path).read_text())
    return _decode(doc.get("metadata", {}))
