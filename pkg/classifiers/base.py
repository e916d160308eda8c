"""Base classifier class that all classifiers inherit from."""

from abc import ABC, abstractmethod

import numpy as np

from darwin_data import FeatureMatrix

HEALTHY = -1
PATIENT = 1


def sign_with_ties(scores: np.ndarray) -> np.ndarray:
    """+1 / -1 by sign; exact zeros go to the patient class."""
    return np.where(np.asarray(scores) >= 0, PATIENT, HEALTHY)


def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Percentage of matching labels."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(f"Got {predictions.shape[0]} predictions for {labels.shape[0]} labels")
    return 100.0 * float(np.mean(predictions == labels))


class Classifier(ABC):
    """Base class for all binary classifiers."""

    METHOD_NAME = "Unknown"

    @abstractmethod
    def fit(self, train: FeatureMatrix) -> "Classifier":
        """Train on the rows and labels of `train`."""
        pass

    @abstractmethod
    def predict(self, queries: FeatureMatrix) -> np.ndarray:
        """Return a +/-1 label per query row."""
        pass

    def score(self, queries: FeatureMatrix) -> float:
        return accuracy(self.predict(queries), queries.labels)
