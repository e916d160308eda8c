"""k-nearest-neighbour voting."""

from dataclasses import dataclass

import numpy as np

from darwin_data import FeatureMatrix

from .base import Classifier, sign_with_ties

METRICS = ("euclidean", "manhattan", "minkowski")
WEIGHTS = ("uniform", "distance")

# Added to distances before inverting them
DISTANCE_EPS = 1e-12


@dataclass
class KnnModel:
    train: FeatureMatrix
    k: int = 5
    metric: str = "euclidean"
    weights: str = "uniform"
    p: float = 2.0  # minkowski order

    def __post_init__(self):
        if not 1 <= self.k <= self.train.n_samples:
            raise ValueError(f"k must be between 1 and {self.train.n_samples}, got {self.k}")
        if self.metric not in METRICS:
            raise ValueError(f"Unknown metric '{self.metric}'; expected one of {', '.join(METRICS)}")
        if self.weights not in WEIGHTS:
            raise ValueError(f"Unknown weights '{self.weights}'; expected one of {', '.join(WEIGHTS)}")
        if self.metric == "minkowski" and not self.p >= 1:
            raise ValueError(f"Minkowski order must be >= 1, got {self.p}")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "metric": self.metric,
            "weights": self.weights,
            "p": self.p,
            "train_ids": self.train.row_ids.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, dataset: FeatureMatrix) -> "KnnModel":
        """Rebuild a saved model; its training rows are looked up by row id in `dataset`."""
        positions = {int(r): i for i, r in enumerate(dataset.row_ids)}
        missing = [r for r in data["train_ids"] if r not in positions]
        if missing:
            raise ValueError(f"{len(missing)} training row(s) not in dataset, e.g. row {missing[0]}")
        train = dataset.take([positions[r] for r in data["train_ids"]])
        return cls(train, data["k"], data["metric"], data["weights"], data.get("p", 2.0))


def pairwise_distances(A: np.ndarray, B: np.ndarray, metric: str = "euclidean", p: float = 2.0) -> np.ndarray:
    diff = np.abs(A[:, None, :] - B[None, :, :])
    if metric == "manhattan":
        return diff.sum(axis=2)
    if metric == "euclidean":
        return np.sqrt((diff ** 2).sum(axis=2))
    return (diff ** p).sum(axis=2) ** (1.0 / p)


def knn_predict(model: KnnModel, queries: FeatureMatrix) -> np.ndarray:
    """Weighted vote of the k nearest training rows.

    Distance ties keep the lower training index; a tied vote predicts +1.
    """
    if queries.n_features != model.train.n_features:
        raise ValueError(f"Queries have {queries.n_features} features, model expects {model.train.n_features}")

    distances = pairwise_distances(queries.data, model.train.data, model.metric, model.p)
    nearest = np.argsort(distances, axis=1, kind="stable")[:, :model.k]
    votes = model.train.labels[nearest].astype(float)
    if model.weights == "distance":
        votes = votes / (np.take_along_axis(distances, nearest, axis=1) + DISTANCE_EPS)
    return sign_with_ties(votes.sum(axis=1))


class KNNClassifier(Classifier):

    METHOD_NAME = "kNN"

    def __init__(self, k: int = 5, metric: str = "euclidean", weights: str = "uniform", p: float = 2.0):
        self.k = k
        self.metric = metric
        self.weights = weights
        self.p = p
        self.model = None

    def fit(self, train: FeatureMatrix) -> "KNNClassifier":
        self.model = KnnModel(train, self.k, self.metric, self.weights, self.p)
        return self

    def predict(self, queries: FeatureMatrix) -> np.ndarray:
        if self.model is None:
            raise ValueError("kNN used before fit")
        return knn_predict(self.model, queries)
