"""Turn labelled object pairs into numeric, model-ready feature matrices."""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import PairInstance
from .geometry import GEOMETRIC_FEATURE_NAMES, extract_geometric_features

logger = logging.getLogger(__name__)


class FeatureGroup(str, enum.Enum):
    GEO = "geo"
    SEM = "sem"
    PER = "per"
    SCENE = "scene"

    @property
    def title(self) -> str:
        return {"geo": "Geo", "sem": "Sem", "per": "Per", "scene": "Scene"}[self.value]


GROUP_ORDER = (FeatureGroup.GEO, FeatureGroup.SEM, FeatureGroup.PER, FeatureGroup.SCENE)

G, S, P, SC = GROUP_ORDER
# The four base groups and the four concatenations used in the experiments.
FEATURE_GROUP_COMBINATIONS = (
    frozenset({G}),
    frozenset({S}),
    frozenset({P}),
    frozenset({SC}),
    frozenset({G, S}),
    frozenset({G, S, P}),
    frozenset({G, S, SC}),
    frozenset({G, S, P, SC}),
)
del G, S, P, SC


class ConfigurationError(ValueError):
    pass


def parse_groups(spec) -> frozenset:
    """Parse ``"geo,sem"`` (or an iterable of names/members) into a group set."""
    if isinstance(spec, str):
        items = [s for s in spec.replace("+", ",").split(",") if s.strip()]
    else:
        items = list(spec)
    groups = set()
    for item in items:
        if isinstance(item, FeatureGroup):
            groups.add(item)
            continue
        try:
            groups.add(FeatureGroup(str(item).strip().lower()))
        except ValueError:
            raise ConfigurationError(f"unknown feature group {item!r}; expected one of geo, sem, per, scene")
    if not groups:
        raise ConfigurationError("feature group set is empty")
    return frozenset(groups)


def ordered_groups(groups) -> Tuple[FeatureGroup, ...]:
    groups = parse_groups(groups)
    return tuple(g for g in GROUP_ORDER if g in groups)


def group_label(groups) -> str:
    return "+".join(g.title for g in ordered_groups(groups))


# ---------------------------------------------------------------------------
# categorical encoders


class Vocabulary:
    """Ordered set of category strings with a token -> index map."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.tokens = tuple(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self):
        return f"Vocabulary({list(self.tokens)!r})"

    @property
    def width(self) -> int:
        return len(self.tokens)

    def column_names(self, prefix: str) -> List[str]:
        return [f"{prefix}={t}" for t in self.tokens]

    def encode(self, token: str) -> np.ndarray:
        return one_hot(token, self)


def build_vocabulary(values: Iterable[str]) -> Vocabulary:
    return Vocabulary(sorted(set(values)))


def one_hot(value: str, voc: Vocabulary) -> np.ndarray:
    """One-hot vector of ``value``; all zeros when it is not in ``voc``."""
    out = np.zeros(len(voc))
    i = voc.index.get(value)
    if i is None:
        logger.debug("category %r not in vocabulary, encoded as zeros", value)
    else:
        out[i] = 1.0
    return out


class EmbeddingTable:
    """Token -> dense vector lookup, read from a word2vec/GloVe text table."""

    def __init__(self, vectors: Dict[str, np.ndarray]):
        dims = {len(v) for v in vectors.values()}
        if len(dims) > 1:
            raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.vectors = {k: np.asarray(v, dtype=float) for k, v in vectors.items()}
        self.dim = dims.pop() if dims else 0

    @property
    def width(self) -> int:
        return self.dim

    def column_names(self, prefix: str) -> List[str]:
        return [f"{prefix}_emb{i}" for i in range(self.dim)]

    def encode(self, token: str) -> np.ndarray:
        vec = self.vectors.get(token)
        if vec is None:
            vec = self.vectors.get(token.lower())
        if vec is None:
            logger.debug("token %r has no embedding, encoded as zeros", token)
            return np.zeros(self.dim)
        return vec.copy()


def load_embeddings(path) -> EmbeddingTable:
    """Read ``token v1 v2 ... vd`` lines. A word2vec ``count dim`` header is skipped."""
    vectors = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{path}:{lineno}: non-finite embedding value")
            vectors[parts[0]] = vec
    return EmbeddingTable(vectors)


# ---------------------------------------------------------------------------
# feature matrix


@dataclass
class FeatureMatrix:
    """Numeric feature rows with named, group-tagged columns.

    Behaves like an array for numpy and scikit-learn (``np.asarray(fm)``),
    while keeping the column schema that trained models check against.
    """

    values: np.ndarray
    columns: Tuple[str, ...]
    groups: Tuple[FeatureGroup, ...]
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            self.values = self.values.reshape(-1, len(self.columns))
        self.columns = tuple(self.columns)
        self.groups = tuple(FeatureGroup(g) for g in self.groups)
        if self.values.shape[1] != len(self.columns) or len(self.groups) != len(self.columns):
            raise ValueError("values, columns and groups disagree on the number of columns")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("column names must be unique")
        if self.y is not None:
            self.y = np.asarray(self.y)
            if len(self.y) != len(self.values):
                raise ValueError("label vector is not aligned with the rows")

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape

    def group_widths(self) -> Dict[FeatureGroup, int]:
        return {g: sum(1 for c in self.groups if c == g) for g in GROUP_ORDER if g in self.groups}

    def select_columns(self, mask) -> "FeatureMatrix":
        mask = np.asarray(mask, dtype=bool)
        return FeatureMatrix(
            self.values[:, mask],
            tuple(c for c, m in zip(self.columns, mask) if m),
            tuple(g for g, m in zip(self.groups, mask) if m),
            self.y,
        )

    def drop_group(self, group) -> "FeatureMatrix":
        group = FeatureGroup(group)
        return self.select_columns([g != group for g in self.groups])

    def take(self, rows) -> "FeatureMatrix":
        return FeatureMatrix(
            self.values[rows], self.columns, self.groups, None if self.y is None else self.y[rows]
        )

    def with_values(self, values) -> "FeatureMatrix":
        return FeatureMatrix(values, self.columns, self.groups, self.y)

    def to_csv(self, path) -> None:
        header = [f"{g.value}:{c}" for g, c in zip(self.groups, self.columns)]
        if self.y is not None:
            header.append("target:relative_class")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i, row in enumerate(self.values):
                cells = [repr(float(v)) for v in row]
                if self.y is not None:
                    cells.append(str(int(self.y[i])))
                writer.writerow(cells)

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty file")
        header, body = rows[0], rows[1:]
        columns, groups, target_col = [], [], None
        for j, token in enumerate(header):
            group, sep, name = token.partition(":")
            if not sep:
                raise ValueError(f"{path}: header token {token!r} is not 'group:column'")
            if group == "target":
                target_col = j
                continue
            groups.append(FeatureGroup(group))
            columns.append(name)
        feat_idx = [j for j in range(len(header)) if j != target_col]
        values = np.array([[float(r[j]) for j in feat_idx] for r in body]).reshape(len(body), len(feat_idx))
        y = None if target_col is None else np.array([int(r[target_col]) for r in body], dtype=int)
        return cls(values, tuple(columns), tuple(groups), y)


# ---------------------------------------------------------------------------
# standardization


class Standardizer(TransformerMixin, BaseEstimator):
    """Z-score columns using statistics of the rows seen in :meth:`fit`.

    Constant training columns get a scale of 1, so they map to 0.
    """

    def fit(self, X, y=None):
        values = _as_values(X)
        if values.shape[0] == 0:
            raise ValueError("cannot fit a Standardizer on zero rows")
        if not np.all(np.isfinite(values)):
            raise ValueError("input contains NaN or infinity")
        self.mean_ = values.mean(axis=0)
        scale = values.std(axis=0)
        # Columns with spread below round-off are treated as constant.
        tiny = 1e-12 * np.maximum(1.0, np.abs(self.mean_))
        scale[scale <= tiny] = 1.0
        self.scale_ = scale
        self.n_features_in_ = values.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        values = _as_values(X)
        if values.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {values.shape[1]}")
        return _like(X, (values - self.mean_) / self.scale_)

    def inverse_transform(self, X):
        check_is_fitted(self, "mean_")
        return _like(X, _as_values(X) * self.scale_ + self.mean_)


def fit_standardizer(train_rows) -> Standardizer:
    return Standardizer().fit(train_rows)


def apply_standardizer(standardizer: Standardizer, rows):
    return standardizer.transform(rows)


def _as_values(X) -> np.ndarray:
    values = np.asarray(X, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {values.shape}")
    return values


def _like(X, values):
    return X.with_values(values) if isinstance(X, FeatureMatrix) else values


# ---------------------------------------------------------------------------
# assembly


@dataclass
class Vocabularies:
    labels: Vocabulary
    poses: Vocabulary
    scenes: Vocabulary

    @classmethod
    def fit(cls, pairs: Sequence[PairInstance], labels=None) -> "Vocabularies":
        return cls(
            labels=Vocabulary(labels) if labels is not None
            else build_vocabulary(o.label for p in pairs for o in (p.obj1, p.obj2)),
            poses=build_vocabulary(o.pose for p in pairs for o in (p.obj1, p.obj2)),
            scenes=build_vocabulary(p.scene_label for p in pairs),
        )


_PER_FLAGS = ("occluded", "truncated", "difficult")


def _group_columns(group, vocs: Vocabularies, label_encoder) -> List[str]:
    if group is FeatureGroup.GEO:
        return list(GEOMETRIC_FEATURE_NAMES)
    if group is FeatureGroup.SEM:
        return label_encoder.column_names("obj1_label") + label_encoder.column_names("obj2_label")
    if group is FeatureGroup.PER:
        cols = []
        for prefix in ("obj1", "obj2"):
            cols += vocs.poses.column_names(f"{prefix}_pose")
            cols += [f"{prefix}_{flag}" for flag in _PER_FLAGS]
        return cols
    return vocs.scenes.column_names("scene")


@lru_cache(maxsize=1 << 16)
def _geometric_row(box1, box2, dims) -> tuple:
    # Cached: cross-validation re-extracts the same pairs once per fold.
    return tuple(extract_geometric_features(box1, box2, dims).values())


def _group_row(group, pair: PairInstance, vocs, label_encoder, scene_confidence) -> np.ndarray:
    if group is FeatureGroup.GEO:
        return np.array(_geometric_row(pair.obj1.box, pair.obj2.box, pair.dims))
    if group is FeatureGroup.SEM:
        return np.concatenate([label_encoder.encode(pair.obj1.label), label_encoder.encode(pair.obj2.label)])
    if group is FeatureGroup.PER:
        parts = []
        for obj in (pair.obj1, pair.obj2):
            parts.append(one_hot(obj.pose, vocs.poses))
            parts.append(np.array([float(getattr(obj, flag)) for flag in _PER_FLAGS]))
        return np.concatenate(parts)
    row = one_hot(pair.scene_label, vocs.scenes)
    if scene_confidence and pair.scene_confidence is not None:
        row = row * pair.scene_confidence
    return row


def assemble(
    pairs: Sequence[PairInstance],
    groups,
    vocs: Vocabularies,
    embeddings: Optional[EmbeddingTable] = None,
    scene_confidence: bool = False,
) -> FeatureMatrix:
    """Build the feature matrix of ``pairs`` for the selected feature groups.

    Columns are concatenated in the fixed order Geo, Sem, Per, Scene. Object
    labels are one-hot encoded with ``vocs.labels`` unless an embedding table
    is given.
    """
    selected = ordered_groups(groups)
    label_encoder = embeddings if embeddings is not None else vocs.labels
    columns, tags = [], []
    for g in selected:
        cols = _group_columns(g, vocs, label_encoder)
        columns += cols
        tags += [g] * len(cols)
    values = np.empty((len(pairs), len(columns)))
    for i, pair in enumerate(pairs):
        values[i] = np.concatenate([_group_row(g, pair, vocs, label_encoder, scene_confidence) for g in selected])
    if not np.all(np.isfinite(values)):
        raise ValueError("assembled features contain NaN or infinity")
    y = np.array([p.relative_class for p in pairs], dtype=int)
    return FeatureMatrix(values, tuple(columns), tuple(tags), y)


class PairFeatureExtractor(TransformerMixin, BaseEstimator):
    """Scikit-learn transformer from a list of :class:`PairInstance` to features.

    ``fit`` learns the category vocabularies (object labels, poses, scenes)
    from the training pairs only; ``transform`` returns a
    :class:`FeatureMatrix`. Categories unseen during ``fit`` encode as zeros.

    Parameters
    ----------
    groups : str or iterable
        Feature groups to emit, e.g. ``"geo,sem,per"``.
    label_vocabulary : sequence of str, optional
        Fixed object-label vocabulary instead of one learned from the data.
    embeddings : EmbeddingTable, optional
        Encode object labels with dense vectors instead of one-hot.
    scene_confidence : bool
        Multiply the scene one-hot by the scene classifier confidence.
    """

    def __init__(self, groups="geo,sem,per,scene", label_vocabulary=None, embeddings=None, scene_confidence=False):
        self.groups = groups
        self.label_vocabulary = label_vocabulary
        self.embeddings = embeddings
        self.scene_confidence = scene_confidence

    def fit(self, pairs, y=None):
        self.groups_ = ordered_groups(self.groups)
        self.vocabularies_ = Vocabularies.fit(pairs, labels=self.label_vocabulary)
        label_encoder = self.embeddings if self.embeddings is not None else self.vocabularies_.labels
        self.feature_names_out_ = tuple(
            c for g in self.groups_ for c in _group_columns(g, self.vocabularies_, label_encoder)
        )
        return self

    def transform(self, pairs) -> FeatureMatrix:
        check_is_fitted(self, "vocabularies_")
        return assemble(pairs, self.groups_, self.vocabularies_, self.embeddings, self.scene_confidence)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return np.array(self.feature_names_out_, dtype=object)
