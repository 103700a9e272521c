"""CART decision tree and random forest classifiers."""
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from ._base import BaseRelativeDepthClassifier
from ._tree_kernel import ENTROPY, GINI, apply_tree, build_tree

_CRITERIA = {"gini": GINI, "entropy": ENTROPY}
_SEED_MAX = 2**31 - 1


@dataclass(frozen=True)
class TreeArrays:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=int)
        for i in range(self.node_count):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X):
        return apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def leaf_proba(self, X):
        counts = self.value[self.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)


def resolve_max_features(max_features, n_features: int) -> int:
    if max_features is None or max_features == "all":
        return n_features
    if max_features == "sqrt":
        return max(1, int(np.sqrt(n_features)))
    if max_features == "log2":
        return max(1, int(np.log2(n_features)))
    if isinstance(max_features, (int, np.integer)) and not isinstance(max_features, bool):
        if max_features < 1:
            raise ValueError(f"max_features must be >= 1, got {max_features}")
        return min(int(max_features), n_features)
    if isinstance(max_features, float) and 0.0 < max_features <= 1.0:
        return max(1, int(max_features * n_features))
    raise ValueError(f"invalid max_features {max_features!r}")


def _check_tree_params(max_depth, min_samples_split, criterion):
    if max_depth is not None and max_depth < 1:
        raise ValueError(f"max_depth must be >= 1 or None, got {max_depth}")
    if min_samples_split < 2:
        raise ValueError(f"min_samples_split must be >= 2, got {min_samples_split}")
    if criterion not in _CRITERIA:
        raise ValueError(f"criterion must be one of {sorted(_CRITERIA)}, got {criterion!r}")


def grow_tree(X, y, weights, n_classes, max_depth, min_samples_split, max_features, criterion, seed) -> TreeArrays:
    keep = weights > 0
    Xk = np.ascontiguousarray(X[keep])
    arrays = build_tree(
        Xk,
        y[keep],
        weights[keep],
        n_classes,
        -1 if max_depth is None else int(max_depth),
        int(min_samples_split),
        resolve_max_features(max_features, X.shape[1]),
        _CRITERIA[criterion],
        int(seed),
    )
    return TreeArrays(*arrays)


class DecisionTree(BaseRelativeDepthClassifier):
    """CART classifier.

    Ties between equally good splits go to the lowest feature index and
    then the lowest threshold, so the grown tree depends only on the data
    and ``random_state`` (the latter matters only when ``max_features``
    selects a random subset at each node).

    Parameters
    ----------
    max_depth : int or None, default=12
    min_samples_split : int, default=2
    criterion : {"gini", "entropy"}, default="gini"
    max_features : None, "sqrt", "log2", int or float, default=None
        Candidate features examined at each split; ``None`` uses all.
    class_weight : None, "balanced" or dict
    random_state : int, default=0
    """

    def __init__(
        self, max_depth=12, min_samples_split=2, criterion="gini", max_features=None, class_weight=None, random_state=0
    ):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.criterion = criterion
        self.max_features = max_features
        self.class_weight = class_weight
        self.random_state = random_state

    def _fit(self, X, y, weights):
        _check_tree_params(self.max_depth, self.min_samples_split, self.criterion)
        self.tree_ = grow_tree(
            X, y, weights, len(self.classes_), self.max_depth, self.min_samples_split,
            self.max_features, self.criterion, self.random_state or 0,
        )

    def _predict_proba(self, X):
        return self.tree_.leaf_proba(X)

    def apply(self, X):
        return self.tree_.apply(self._validate_predict(X))

    def get_depth(self):
        return self.tree_.depth


class RandomForest(BaseRelativeDepthClassifier):
    """Bagged CART trees with random feature subsets; predicts by majority vote.

    ``predict_proba`` returns the fraction of trees voting for each class,
    and ``predict`` its argmax, so vote ties go to the lowest class index.
    Each tree gets its own seed derived from ``random_state``, which keeps
    results identical whether trees are grown serially or with ``n_jobs``.
    """

    def __init__(
        self,
        n_estimators=100,
        max_depth=12,
        min_samples_split=2,
        criterion="gini",
        max_features="sqrt",
        bootstrap=True,
        class_weight=None,
        random_state=0,
        n_jobs=None,
    ):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.criterion = criterion
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.class_weight = class_weight
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _tree_seeds(self):
        rng = np.random.default_rng(self.random_state)
        return rng.integers(0, _SEED_MAX, size=(self.n_estimators, 2))

    def _fit(self, X, y, weights):
        _check_tree_params(self.max_depth, self.min_samples_split, self.criterion)
        if self.n_estimators < 1:
            raise ValueError(f"n_estimators must be >= 1, got {self.n_estimators}")
        n = len(y)

        def one_tree(boot_seed, split_seed):
            w = weights
            if self.bootstrap:
                draws = np.random.default_rng(boot_seed).integers(0, n, size=n)
                w = weights * np.bincount(draws, minlength=n)
            return grow_tree(
                X, y, w, len(self.classes_), self.max_depth, self.min_samples_split,
                self.max_features, self.criterion, split_seed,
            )

        seeds = self._tree_seeds()
        if self.n_jobs in (None, 1):
            trees = [one_tree(a, b) for a, b in seeds]
        else:
            trees = Parallel(n_jobs=self.n_jobs, prefer="threads")(delayed(one_tree)(a, b) for a, b in seeds)
        self.estimators_ = trees

    def tree_votes(self, X):
        """Class index voted by every tree, shape ``(n_estimators, n_samples)``."""
        X = self._validate_predict(X)
        return self._votes(X)

    def _votes(self, X):
        return np.stack([np.argmax(t.value[t.apply(X)], axis=1) for t in self.estimators_])

    def _predict_proba(self, X):
        votes = self._votes(X)
        n_classes = len(self.classes_)
        counts = np.stack([(votes == c).sum(axis=0) for c in range(n_classes)], axis=1)
        return counts / float(len(self.estimators_))
