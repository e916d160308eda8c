from .base import Classifier, HEALTHY, PATIENT, accuracy, sign_with_ties
from .svm import (
    SvmModel,
    SVCClassifier,
    QuantumSVCClassifier,
    svm_fit,
    svm_predict,
    svm_decision_function,
    svm_dual_objective,
)
from .knn import KnnModel, KNNClassifier, knn_predict, pairwise_distances
from .tree import TreeLimits, TreeModel, TreeNode, TreeClassifier, tree_fit, tree_predict, impurity

__all__ = [
    "Classifier",
    "HEALTHY",
    "PATIENT",
    "accuracy",
    "sign_with_ties",
    "SvmModel",
    "SVCClassifier",
    "QuantumSVCClassifier",
    "svm_fit",
    "svm_predict",
    "svm_decision_function",
    "svm_dual_objective",
    "KnnModel",
    "KNNClassifier",
    "knn_predict",
    "pairwise_distances",
    "TreeLimits",
    "TreeModel",
    "TreeNode",
    "TreeClassifier",
    "tree_fit",
    "tree_predict",
    "impurity",
]
