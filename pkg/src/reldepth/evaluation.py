"""Stratified cross-validation and the feature-group x model x threshold grid."""
from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.pipeline import Pipeline

from .dataset import (
    CLASSES,
    IMBALANCE_PRONE_THRESHOLD,
    ClassDistribution,
    ImageRecord,
    PairInstance,
    build_pairs,
    class_distribution,
)
from .encoding import (
    FEATURE_GROUP_COMBINATIONS,
    ConfigurationError,
    PairFeatureExtractor,
    Standardizer,
    group_label,
    parse_groups,
)
from .models import ClassifierKind, make_classifier

logger = logging.getLogger(__name__)

N_CLASSES = len(CLASSES)


# ---------------------------------------------------------------------------
# folds


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    folds: np.ndarray

    def test_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.folds == i)

    def train_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.folds != i)

    def split(self):
        for i in range(self.k):
            yield self.train_indices(i), self.test_indices(i)


def stratified_kfold(y, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Assign every row to one of ``k`` folds, class by class.

    Rows of each class are shuffled and dealt round-robin, so per-class
    counts across folds differ by at most one. Each class starts dealing
    where the previous one stopped, which also balances total fold sizes.
    """
    y = np.asarray(y)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > len(y):
        raise ValueError(f"cannot split {len(y)} rows into {k} folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=int)
    offset = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        members = members[rng.permutation(len(members))]
        folds[members] = (offset + np.arange(len(members))) % k
        offset = (offset + len(members)) % k
    return FoldAssignment(k, folds)


class StratifiedFolds:
    """Scikit-learn style splitter wrapping :func:`stratified_kfold`."""

    def __init__(self, n_splits=5, random_state=0):
        self.n_splits = n_splits
        self.random_state = random_state

    def get_n_splits(self, X=None, y=None, groups=None):
        return self.n_splits

    def split(self, X, y, groups=None):
        yield from stratified_kfold(y, self.n_splits, self.random_state).split()


# ---------------------------------------------------------------------------
# metrics


def confusion(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    """Counts ``C[i, j]`` of rows with true class ``i`` predicted as ``j``."""
    y_true, y_pred = np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted labels")
    out = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(out, (y_true, y_pred), 1)
    return out


def accuracy(y_true, y_pred) -> float:
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted labels")
    if len(y_true) == 0:
        raise ValueError("accuracy of an empty label list is undefined")
    return float(np.mean(y_true == y_pred))


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ExperimentSpec:
    groups: frozenset
    model: ClassifierKind
    threshold: float = 0
    hyperparameters: Tuple[Tuple[str, object], ...] = ()
    seed: int = 0
    folds: int = 5

    def __post_init__(self):
        object.__setattr__(self, "groups", parse_groups(self.groups))
        object.__setattr__(self, "model", ClassifierKind.parse(self.model))
        if isinstance(self.hyperparameters, Mapping):
            object.__setattr__(self, "hyperparameters", tuple(sorted(self.hyperparameters.items())))
        if self.threshold < 0:
            raise ConfigurationError(f"threshold must be >= 0, got {self.threshold}")
        if self.folds < 2:
            raise ConfigurationError(f"folds must be >= 2, got {self.folds}")
        if self.groups not in FEATURE_GROUP_COMBINATIONS:
            warnings.warn(f"feature groups {self.group_name} are not one of the eight standard combinations")

    @property
    def group_name(self) -> str:
        return group_label(self.groups)

    @property
    def imbalance_prone(self) -> bool:
        return self.threshold >= IMBALANCE_PRONE_THRESHOLD

    def build_pipeline(self) -> Pipeline:
        params = {"random_state": self.seed, **dict(self.hyperparameters)}
        return Pipeline(
            [
                ("features", PairFeatureExtractor(groups=",".join(g.value for g in self.groups))),
                ("scale", Standardizer()),
                ("model", make_classifier(self.model, **params)),
            ]
        )

    def describe(self) -> dict:
        return {
            "feature_group": self.group_name,
            "model": self.model.abbreviation,
            "threshold": self.threshold,
            "hyperparameters": dict(self.hyperparameters),
            "seed": self.seed,
            "folds": self.folds,
        }


@dataclass
class EvaluationReport:
    spec: ExperimentSpec
    fold_accuracies: List[float]
    confusion: np.ndarray
    distribution: ClassDistribution
    predictions: np.ndarray
    models: Optional[list] = field(default=None, repr=False)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def pooled_accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            **self.spec.describe(),
            "fold_accuracies": list(self.fold_accuracies),
            "mean_accuracy": self.mean_accuracy,
            "pooled_accuracy": self.pooled_accuracy,
            "confusion": self.confusion.tolist(),
            "class_counts": {str(c): n for c, n in self.distribution.counts.items()},
            "imbalance_prone": self.spec.imbalance_prone,
        }


class ExperimentError(RuntimeError):
    def __init__(self, spec, fold, cause):
        self.spec, self.fold, self.cause = spec, fold, cause
        where = "" if fold is None else f" (fold {fold})"
        super().__init__(f"{spec.group_name}/{spec.model.abbreviation}/T={spec.threshold}{where}: {cause}")


def _as_pairs(data, threshold) -> List[PairInstance]:
    data = list(data)
    if data and isinstance(data[0], ImageRecord):
        return build_pairs(data, threshold)
    return data


def run_experiment(spec: ExperimentSpec, data, keep_models: bool = False) -> EvaluationReport:
    """Cross-validate one configuration.

    ``data`` is either a list of :class:`ImageRecord` (labelled here at
    ``spec.threshold``) or already labelled :class:`PairInstance` objects.
    Vocabularies, the standardizer and the model are fitted on the training
    folds only.
    """
    pairs = _as_pairs(data, spec.threshold)
    if not pairs:
        raise ExperimentError(spec, None, "no valid pairs")
    y = np.array([p.relative_class for p in pairs], dtype=int)
    try:
        assignment = stratified_kfold(y, spec.folds, spec.seed)
    except ValueError as exc:
        raise ExperimentError(spec, None, exc) from exc

    fold_acc, models = [], []
    predictions = np.full(len(pairs), -1, dtype=int)
    for i, (train, test) in enumerate(assignment.split()):
        try:
            pipe = spec.build_pipeline()
            pipe.fit([pairs[j] for j in train], y[train])
            pred = pipe.predict([pairs[j] for j in test])
        except Exception as exc:
            raise ExperimentError(spec, i, exc) from exc
        predictions[test] = pred
        fold_acc.append(accuracy(y[test], pred))
        if keep_models:
            models.append(pipe)
    return EvaluationReport(
        spec=spec,
        fold_accuracies=fold_acc,
        confusion=confusion(y, predictions),
        distribution=class_distribution(y),
        predictions=predictions,
        models=models if keep_models else None,
    )


def grid_specs(
    groups_list=FEATURE_GROUP_COMBINATIONS,
    models=tuple(ClassifierKind),
    thresholds=(0, 2),
    hyperparameters: Optional[Dict[str, dict]] = None,
    seed: int = 0,
    folds: int = 5,
) -> List[ExperimentSpec]:
    """Cartesian product of settings, ordered threshold, feature group, model."""
    hyperparameters = hyperparameters or {}
    specs = []
    for t in thresholds:
        for groups in groups_list:
            for model in models:
                kind = ClassifierKind.parse(model)
                specs.append(
                    ExperimentSpec(
                        groups=groups,
                        model=kind,
                        threshold=t,
                        hyperparameters=hyperparameters.get(kind.value, {}),
                        seed=seed,
                        folds=folds,
                    )
                )
    return specs


@dataclass
class GridResult:
    reports: List[EvaluationReport]
    failures: List[Tuple[ExperimentSpec, str]]

    def __len__(self):
        return len(self.reports)


def _run_safely(spec, data):
    try:
        return run_experiment(spec, data), None
    except Exception as exc:
        logger.warning("experiment failed: %s", exc)
        return None, str(exc)


def run_grid(specs: Sequence, data, n_jobs: Optional[int] = None) -> GridResult:
    """Run every spec; failures are recorded and the grid carries on.

    Reports come back sorted by mean accuracy, descending. The sort is
    stable, so ties keep the order of ``specs`` regardless of ``n_jobs``.
    Entries of ``specs`` that are not valid :class:`ExperimentSpec` objects
    (for example a dict with an empty group set) are recorded as failures.
    """
    data = list(data)
    built = []
    for s in specs:
        try:
            built.append(s if isinstance(s, ExperimentSpec) else ExperimentSpec(**s))
        except Exception as exc:
            built.append(exc)

    runnable = [(i, s) for i, s in enumerate(built) if isinstance(s, ExperimentSpec)]
    if n_jobs in (None, 1):
        outcomes = [_run_safely(s, data) for _, s in runnable]
    else:
        outcomes = Parallel(n_jobs=n_jobs)(delayed(_run_safely)(s, data) for _, s in runnable)

    results = {i: out for (i, _), out in zip(runnable, outcomes)}
    reports, failures = [], []
    for i, s in enumerate(built):
        if not isinstance(s, ExperimentSpec):
            failures.append((specs[i], f"invalid spec: {s}"))
            continue
        report, error = results[i]
        if report is None:
            failures.append((s, error))
        else:
            reports.append(report)
    reports.sort(key=lambda r: -r.mean_accuracy)
    return GridResult(reports, failures)


# ---------------------------------------------------------------------------
# report output

REPORT_COLUMNS = ("FeatureGroup", "Model", "Threshold", "FoldAccuracies", "MeanAccuracy", "PooledAccuracy")


def _fmt_threshold(t):
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def report_rows(reports: Sequence[EvaluationReport]) -> List[List[str]]:
    return [
        [
            r.spec.group_name,
            r.spec.model.abbreviation,
            _fmt_threshold(r.spec.threshold),
            ";".join(f"{a:.6f}" for a in r.fold_accuracies),
            f"{r.mean_accuracy:.6f}",
            f"{r.pooled_accuracy:.6f}",
        ]
        for r in reports
    ]


def reports_to_csv(reports: Sequence[EvaluationReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    writer.writerows(report_rows(reports))
    return buf.getvalue()


def format_table(reports: Sequence[EvaluationReport], failures=()) -> str:
    """Aligned text table: feature group, model, threshold, accuracies and folds."""
    header = ["FeatureGroup", "Model", "T/H", "Accuracy", "Pooled", "Folds"]
    rows = [
        [r.spec.group_name, r.spec.model.abbreviation, _fmt_threshold(r.spec.threshold),
         f"{100 * r.mean_accuracy:.3f}%" + ("*" if r.spec.imbalance_prone else ""),
         f"{100 * r.pooled_accuracy:.3f}%", " ".join(f"{a:.3f}" for a in r.fold_accuracies)]
        for r in reports
    ]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip() for row in [header, *rows]]
    if any(r.spec.imbalance_prone for r in reports):
        lines.append(f"* threshold >= {IMBALANCE_PRONE_THRESHOLD}: strong class imbalance, accuracy inflated by the equal class")
    for spec, error in failures:
        lines.append(f"FAILED {getattr(spec, 'group_name', spec)}: {error}")
    return "\n".join(lines) + "\n"


def reports_to_json(reports: Sequence[EvaluationReport], failures=()) -> str:
    doc = {
        "reports": [r.to_dict() for r in reports],
        "failures": [
            {"spec": s.describe() if isinstance(s, ExperimentSpec) else repr(s), "error": e} for s, e in failures
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def shuffled_labels(pairs: Sequence[PairInstance], seed: int) -> List[PairInstance]:
    """Copy of ``pairs`` with the class labels randomly permuted."""
    perm = np.random.default_rng(seed).permutation(len(pairs))
    return [replace(p, relative_class=pairs[j].relative_class) for p, j in zip(pairs, perm)]
