"""Input validation and schema bookkeeping shared by the classifiers."""
import hashlib

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..encoding import FeatureMatrix


class SchemaMismatchError(ValueError):
    """Prediction input does not match the feature schema used for training."""


def schema_checksum(columns) -> str:
    return hashlib.sha256("\n".join(columns).encode()).hexdigest()[:16]


def compute_class_weight(y_encoded, classes, class_weight):
    """Per-row weights; ``"balanced"`` uses n / (n_classes * count(class))."""
    if class_weight is None:
        return np.ones(len(y_encoded))
    n_classes = len(classes)
    if class_weight == "balanced":
        counts = np.bincount(y_encoded, minlength=n_classes).astype(float)
        per_class = len(y_encoded) / (n_classes * counts)
    elif isinstance(class_weight, dict):
        per_class = np.array([float(class_weight.get(c, 1.0)) for c in classes.tolist()])
    else:
        raise ValueError(f"class_weight must be None, 'balanced' or a dict, got {class_weight!r}")
    return per_class[y_encoded]


class BaseRelativeDepthClassifier(ClassifierMixin, BaseEstimator):
    """Common fit/predict plumbing.

    Subclasses implement ``_fit(X, y_encoded, sample_weight)`` and
    ``_predict_proba(X)`` on validated float arrays with labels encoded as
    ``0..n_classes-1``.
    """

    def _validate_fit(self, X, y, sample_weight=None):
        columns = X.columns if isinstance(X, FeatureMatrix) else None
        if y is None and isinstance(X, FeatureMatrix):
            y = X.y
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, y_encoded = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError(
                f"training data contains only one class ({self.classes_[0]!r}); need at least 2 classes"
            )
        self.n_features_in_ = X.shape[1]
        if columns is not None:
            self.feature_names_in_ = np.array(columns, dtype=object)
            self.schema_checksum_ = schema_checksum(columns)
        else:
            for attr in ("feature_names_in_", "schema_checksum_"):
                if hasattr(self, attr):
                    delattr(self, attr)
        weights = compute_class_weight(y_encoded, self.classes_, getattr(self, "class_weight", None))
        if sample_weight is not None:
            sample_weight = np.asarray(sample_weight, dtype=float)
            if sample_weight.shape != (len(y),) or np.any(sample_weight < 0):
                raise ValueError("sample_weight must be a non-negative vector aligned with y")
            weights = weights * sample_weight
        return X, y_encoded.astype(np.int64), weights

    def _validate_predict(self, X):
        check_is_fitted(self, "classes_")
        if isinstance(X, FeatureMatrix) and hasattr(self, "schema_checksum_"):
            if schema_checksum(X.columns) != self.schema_checksum_:
                missing = set(self.feature_names_in_) - set(X.columns)
                extra = set(X.columns) - set(self.feature_names_in_)
                raise SchemaMismatchError(
                    f"feature schema differs from training (missing {len(missing)}, unexpected {len(extra)} columns,"
                    " or a different column order)"
                )
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatchError(
                f"X has {X.shape[1]} features, but {type(self).__name__} was trained with {self.n_features_in_}"
            )
        return X

    def fit(self, X, y=None, sample_weight=None):
        X, y_encoded, weights = self._validate_fit(X, y, sample_weight)
        self._fit(X, y_encoded, weights)
        return self

    def predict_proba(self, X):
        X = self._validate_predict(X)
        if X.shape[0] == 0:
            return np.empty((0, len(self.classes_)))
        return self._predict_proba(X)

    def predict(self, X):
        proba = self.predict_proba(X)
        # argmax returns the first maximum, i.e. the lowest class index on ties
        return self.classes_[np.argmax(proba, axis=1)] if len(proba) else self.classes_[:0]
