"""Soft-margin SVM on precomputed Gram matrices, solved by SMO."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from darwin_data import FeatureMatrix
from kernels import EXACT, Execution, GramMatrix, KernelParams, gram
from quantum import CircuitSpec

from .base import Classifier, sign_with_ties

# Denominator floor for pairs with a non-positive curvature (indefinite kernels)
TAU = 1e-12

# alpha above this counts as a support vector
SUPPORT_THRESHOLD = 1e-8

DEFAULT_MAX_ITER = 100_000


@dataclass
class SvmModel:
    """Dual solution: f(x) = sum_i alpha_i y_i K(x_i, x) + bias."""
    alphas: np.ndarray
    bias: float
    support_idx: np.ndarray
    train_labels: np.ndarray
    C: float
    tol: float
    params: Optional[KernelParams] = None
    train_ids: Optional[np.ndarray] = None
    n_iter: int = 0

    @property
    def dual_coef(self) -> np.ndarray:
        return self.alphas * self.train_labels

    def check(self):
        """Raise if the box or equality constraints are violated."""
        if np.any(self.alphas < -1e-12) or np.any(self.alphas > self.C + 1e-12):
            raise ValueError("SVM dual variables outside [0, C]")
        balance = float(self.dual_coef.sum())
        if abs(balance) > 1e-6:
            raise ValueError(f"SVM equality constraint violated: sum(alpha*y) = {balance:.3e}")
        expected = np.flatnonzero(self.alphas > SUPPORT_THRESHOLD)
        if not np.array_equal(expected, self.support_idx):
            raise ValueError("SVM support indices out of sync with alphas")

    def to_dict(self) -> dict:
        return {
            "alphas": self.alphas.tolist(),
            "bias": self.bias,
            "support_idx": self.support_idx.tolist(),
            "train_labels": self.train_labels.tolist(),
            "C": self.C,
            "tol": self.tol,
            "params": self.params.to_dict() if self.params else None,
            "train_ids": self.train_ids.tolist() if self.train_ids is not None else None,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SvmModel":
        return cls(
            alphas=np.asarray(data["alphas"], dtype=float),
            bias=data["bias"],
            support_idx=np.asarray(data["support_idx"], dtype=int),
            train_labels=np.asarray(data["train_labels"], dtype=int),
            C=data["C"],
            tol=data["tol"],
            params=KernelParams.from_dict(data["params"]) if data.get("params") else None,
            train_ids=np.asarray(data["train_ids"], dtype=int) if data.get("train_ids") is not None else None,
            n_iter=data.get("n_iter", 0),
        )


def svm_dual_objective(alphas: np.ndarray, K: np.ndarray, labels: np.ndarray) -> float:
    """sum(alpha) - 1/2 (alpha*y)^T K (alpha*y), the quantity SMO maximizes."""
    coef = alphas * labels
    return float(alphas.sum() - 0.5 * coef @ K @ coef)


def _bias(alphas, grad, y, C):
    # Offset from free vectors, or the middle of the feasible interval
    yg = y * grad
    free = (alphas > 0) & (alphas < C)
    if free.any():
        rho = float(yg[free].mean())
    else:
        at_upper = alphas >= C
        at_lower = alphas <= 0
        ub_mask = (at_upper & (y == -1)) | (at_lower & (y == 1))
        lb_mask = (at_upper & (y == 1)) | (at_lower & (y == -1))
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2)
    return -rho


def svm_fit(g: GramMatrix, labels: np.ndarray, C: float = 1.0, tol: float = 1e-3,
            max_iter: int = DEFAULT_MAX_ITER) -> SvmModel:
    """Maximize the soft-margin dual by SMO on the maximal violating pair.

    Stops once the largest KKT violation is at most `tol`.
    """
    K = np.asarray(g.values, dtype=float)
    y = np.asarray(labels, dtype=float)
    n = y.size
    if K.shape != (n, n):
        raise ValueError(f"Training Gram must be {n}x{n}, got {K.shape}")
    if not np.allclose(K, K.T, rtol=0, atol=1e-9):
        raise ValueError("Training Gram is not symmetric")
    if not np.isin(y, (-1, 1)).all():
        raise ValueError("Labels must be -1 or +1")
    if np.all(y == y[0]):
        raise ValueError("SVM training needs both classes")
    if not C > 0 or not tol > 0:
        raise ValueError(f"C and tol must be positive, got C={C}, tol={tol}")

    alphas = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a^T Q a - e^T a, Q = yy^T * K
    n_iter = 0
    gap = np.inf
    while n_iter < max_iter:
        score = -y * grad
        up = ((y == 1) & (alphas < C)) | ((y == -1) & (alphas > 0))
        low = ((y == 1) & (alphas > 0)) | ((y == -1) & (alphas < C))
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = score[i] - score[j]
        if gap <= tol:
            break

        curvature = K[i, i] + K[j, j] - 2 * K[i, j]
        step = gap / max(curvature, TAU)
        step = min(
            step,
            C - alphas[i] if y[i] == 1 else alphas[i],
            alphas[j] if y[j] == 1 else C - alphas[j],
        )
        alphas[i] += y[i] * step
        alphas[j] -= y[j] * step
        # Snap round-off onto the box
        for t in (i, j):
            if alphas[t] < 1e-12 * C:
                alphas[t] = 0.0
            elif alphas[t] > C * (1 - 1e-12):
                alphas[t] = C
        grad += step * y * (K[:, i] - K[:, j])
        n_iter += 1
    else:
        print(f"  Warning: SMO stopped after {max_iter} iterations (violation {gap:.2e} > tol {tol})")

    model = SvmModel(
        alphas=alphas,
        bias=_bias(alphas, grad, y, C),
        support_idx=np.flatnonzero(alphas > SUPPORT_THRESHOLD),
        train_labels=y.astype(int),
        C=C,
        tol=tol,
        params=g.params,
        train_ids=np.asarray(g.row_ids).copy(),
        n_iter=n_iter,
    )
    model.check()
    return model


def svm_decision_function(model: SvmModel, gram_test: GramMatrix) -> np.ndarray:
    values = np.asarray(gram_test.values, dtype=float)
    if values.ndim != 2 or values.shape[1] != model.alphas.size:
        raise ValueError(f"Test Gram needs {model.alphas.size} columns, got shape {values.shape}")
    if model.train_ids is not None and not np.array_equal(gram_test.col_ids, model.train_ids):
        raise ValueError("Test Gram columns do not match the training rows")
    support = model.support_idx
    return values[:, support] @ model.dual_coef[support] + model.bias


def svm_predict(model: SvmModel, gram_test: GramMatrix) -> np.ndarray:
    """sign(sum_i alpha_i y_i K(test, i) + bias); a zero score predicts +1."""
    return sign_with_ties(svm_decision_function(model, gram_test))


class SVCClassifier(Classifier):
    """SVC over a materialized classical kernel Gram."""

    METHOD_NAME = "SVC"

    def __init__(self, kernel: KernelParams, C: float = 1.0, tol: float = 1e-3,
                 execution: Execution = EXACT, jobs: int = 1):
        self.kernel = kernel
        self.C = C
        self.tol = tol
        self.execution = execution
        self.jobs = jobs
        self.model: Optional[SvmModel] = None
        self._train: Optional[FeatureMatrix] = None

    def fit(self, train: FeatureMatrix) -> "SVCClassifier":
        g = gram(train, train, self.kernel, self.execution, self.jobs)
        self.model = svm_fit(g, train.labels, self.C, self.tol)
        self._train = train
        return self

    def predict(self, queries: FeatureMatrix) -> np.ndarray:
        if self.model is None:
            raise ValueError(f"{self.METHOD_NAME} used before fit")
        g = gram(queries, self._train, self.model.params, self.execution, self.jobs)
        return svm_predict(self.model, g)


class QuantumSVCClassifier(SVCClassifier):
    """SVC over the fidelity kernel of a data-encoding circuit."""

    METHOD_NAME = "QSVC"

    def __init__(self, circuit: CircuitSpec, C: float = 1.0, tol: float = 1e-3,
                 execution: Execution = EXACT, jobs: int = 1):
        super().__init__(KernelParams(kind="quantum", circuit=circuit), C, tol, execution, jobs)
