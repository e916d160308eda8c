"""Binary decision tree grown by recursive threshold splits."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from darwin_data import FeatureMatrix

from .base import HEALTHY, PATIENT, Classifier

CRITERIA = ("gini", "entropy")
SPLITTERS = ("best", "random")


@dataclass(frozen=True)
class TreeLimits:
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ValueError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")


@dataclass
class TreeNode:
    """Internal node (feature, threshold, two children) or leaf (label)."""
    n_negative: int
    n_positive: int
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def n_samples(self) -> int:
        return self.n_negative + self.n_positive

    @property
    def label(self) -> int:
        return PATIENT if self.n_positive >= self.n_negative else HEALTHY

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"label": self.label, "counts": [self.n_negative, self.n_positive]}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "counts": [self.n_negative, self.n_positive],
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeNode":
        n_negative, n_positive = data["counts"]
        if "feature" not in data:
            return cls(n_negative, n_positive)
        return cls(n_negative, n_positive, int(data["feature"]), float(data["threshold"]),
                   cls.from_dict(data["left"]), cls.from_dict(data["right"]))


@dataclass
class TreeModel:
    root: TreeNode
    n_features: int
    criterion: str = "gini"
    splitter: str = "best"
    limits: TreeLimits = field(default_factory=TreeLimits)

    def depth(self) -> int:
        def _depth(node):
            return 0 if node.is_leaf else 1 + max(_depth(node.left), _depth(node.right))
        return _depth(self.root)

    def n_leaves(self) -> int:
        def _count(node):
            return 1 if node.is_leaf else _count(node.left) + _count(node.right)
        return _count(self.root)

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "splitter": self.splitter,
            "max_depth": self.limits.max_depth,
            "min_samples_split": self.limits.min_samples_split,
            "min_samples_leaf": self.limits.min_samples_leaf,
            "n_features": self.n_features,
            "root": self.root.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeModel":
        limits = TreeLimits(data["max_depth"], data["min_samples_split"], data["min_samples_leaf"])
        return cls(root=TreeNode.from_dict(data["root"]), n_features=data["n_features"],
                   criterion=data["criterion"], splitter=data["splitter"], limits=limits)


def impurity(n_positive, n_total, criterion: str = "gini"):
    """Gini or entropy (bits) of a two-class node; works elementwise."""
    n_total = np.asarray(n_total, dtype=float)
    p = np.divide(n_positive, n_total, out=np.zeros_like(n_total), where=n_total > 0)
    q = 1.0 - p
    if criterion == "gini":
        return 1.0 - p ** 2 - q ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1)), 0.0)
        terms = terms + np.where(q > 0, -q * np.log2(np.where(q > 0, q, 1)), 0.0)
    return terms


def _best_threshold(column, y, criterion, min_leaf):
    # Candidate thresholds are midpoints between consecutive distinct values
    n = y.size
    order = np.argsort(column, kind="stable")
    xs, ys = column[order], y[order]
    n_left = np.arange(1, n)
    pos_left = np.cumsum(ys == PATIENT)[:-1]
    total_pos = int(np.sum(ys == PATIENT))

    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return np.inf, None
    weighted = (n_left * impurity(pos_left, n_left, criterion)
                + (n - n_left) * impurity(total_pos - pos_left, n - n_left, criterion)) / n
    weighted = np.where(valid, weighted, np.inf)
    k = int(np.argmin(weighted))
    threshold = (xs[k] + xs[k + 1]) / 2
    if threshold >= xs[k + 1]:
        threshold = xs[k]
    return float(weighted[k]), float(threshold)


def _random_threshold(column, y, criterion, min_leaf, rng):
    lo, hi = column.min(), column.max()
    if hi <= lo:
        return np.inf, None
    threshold = float(rng.uniform(lo, hi))
    left = column <= threshold
    n_left = int(left.sum())
    n = y.size
    if n_left < min_leaf or n - n_left < min_leaf:
        return np.inf, None
    pos_left = int(np.sum(y[left] == PATIENT))
    pos_right = int(np.sum(y[~left] == PATIENT))
    weighted = (n_left * impurity(pos_left, n_left, criterion)
                + (n - n_left) * impurity(pos_right, n - n_left, criterion)) / n
    return float(weighted), threshold


def _grow(X, y, depth, criterion, splitter, limits, rng) -> TreeNode:
    n_pos = int(np.sum(y == PATIENT))
    node = TreeNode(n_negative=y.size - n_pos, n_positive=n_pos)

    if n_pos == 0 or n_pos == y.size:
        return node
    if limits.max_depth is not None and depth >= limits.max_depth:
        return node
    if y.size < limits.min_samples_split or y.size < 2 * limits.min_samples_leaf:
        return node

    best_score, best_feature, best_threshold = np.inf, None, None
    for f in range(X.shape[1]):
        if splitter == "best":
            score, threshold = _best_threshold(X[:, f], y, criterion, limits.min_samples_leaf)
        else:
            score, threshold = _random_threshold(X[:, f], y, criterion, limits.min_samples_leaf, rng)
        if threshold is not None and score < best_score - 1e-12:
            best_score, best_feature, best_threshold = score, f, threshold

    if best_feature is None:
        return node

    left = X[:, best_feature] <= best_threshold
    node.feature = best_feature
    node.threshold = best_threshold
    node.left = _grow(X[left], y[left], depth + 1, criterion, splitter, limits, rng)
    node.right = _grow(X[~left], y[~left], depth + 1, criterion, splitter, limits, rng)
    return node


def tree_fit(data: FeatureMatrix, criterion: str = "gini", splitter: str = "best",
             limits: TreeLimits = TreeLimits(), seed: int = 0) -> TreeModel:
    """Grow a tree until purity, depth or sample-count limits stop it.

    The random splitter draws one threshold per feature, uniform between the
    node's min and max, and keeps the best of those.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"Unknown criterion '{criterion}'; expected one of {', '.join(CRITERIA)}")
    if splitter not in SPLITTERS:
        raise ValueError(f"Unknown splitter '{splitter}'; expected one of {', '.join(SPLITTERS)}")

    rng = np.random.default_rng(seed)
    root = _grow(data.data, data.labels, 0, criterion, splitter, limits, rng)
    return TreeModel(root=root, n_features=data.n_features, criterion=criterion,
                     splitter=splitter, limits=limits)


def tree_predict(model: TreeModel, queries: FeatureMatrix) -> np.ndarray:
    """Route each row (<= threshold goes left) to a leaf label."""
    if queries.n_features < model.n_features:
        raise ValueError(f"Feature index out of range: tree uses {model.n_features} features, "
                         f"queries have {queries.n_features}")
    predictions = np.empty(queries.n_samples, dtype=int)
    for r, row in enumerate(queries.data):
        node = model.root
        while not node.is_leaf:
            node = node.left if row[node.feature] <= node.threshold else node.right
        predictions[r] = node.label
    return predictions


class TreeClassifier(Classifier):

    METHOD_NAME = "DT"

    def __init__(self, criterion: str = "gini", splitter: str = "best", max_depth: Optional[int] = None,
                 min_samples_split: int = 2, min_samples_leaf: int = 1, seed: int = 0):
        self.criterion = criterion
        self.splitter = splitter
        self.limits = TreeLimits(max_depth, min_samples_split, min_samples_leaf)
        self.seed = seed
        self.model = None

    def fit(self, train: FeatureMatrix) -> "TreeClassifier":
        self.model = tree_fit(train, self.criterion, self.splitter, self.limits, self.seed)
        return self

    def predict(self, queries: FeatureMatrix) -> np.ndarray:
        if self.model is None:
            raise ValueError("DT used before fit")
        return tree_predict(self.model, queries)
