"""Experiment harness: grid search over ShuffleSplit splits, ensembles, noise study.

Each split tunes on train/validation, refits the best grid point on
train + validation and scores it on the test rows. Accuracies are percentages
and spreads are population standard deviations.
"""

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

import reports
from classifiers import (
    Classifier,
    KNNClassifier,
    QuantumSVCClassifier,
    SVCClassifier,
    TreeClassifier,
    accuracy,
    sign_with_ties,
)
from darwin_data import (
    CATEGORY_NAMES,
    FeatureMatrix,
    SplitPlan,
    category_tasks,
    fit_preprocessor,
    fit_scaler,
    preprocess,
    select_task_features,
    standardize,
)
from kernels import EXACT, Execution, KernelParams, Spectrum, gram, save_gram, spectrum
from quantum import CircuitSpec, NoiseModel, build_ansatz

METHODS = ("SVC", "KNN", "DT", "QSVC")

# Grids; the axes are the ones tuned in the study, the values are ours
DEFAULT_GRIDS = {
    "SVC": {
        "kernel": ["rbf", "linear", "poly", "sigmoid"],
        "C": [0.1, 1, 10, 100],
        "gamma": ["scale", 0.001, 0.01, 0.1],
        "tol": [1e-3, 1e-4],
    },
    "KNN": {
        "k": [3, 5, 7, 9, 11],
        "metric": ["euclidean", "manhattan"],
        "weights": ["uniform", "distance"],
    },
    "DT": {
        "criterion": ["gini", "entropy"],
        "splitter": ["best", "random"],
        "max_depth": [3, 5, 10, None],
        "min_samples_split": [2, 5, 10],
        "min_samples_leaf": [1, 2, 5],
    },
    "QSVC": {
        "bandwidth": [0.1, 0.2, 0.4, 0.6, 0.8, 1.0],
    },
}

# Quantum SVC keeps the library defaults except for the kernel
QSVC_C = 1.0
QSVC_TOL = 1e-3

DEFAULT_QUBITS = (6, 8, 12)
PER_TASK_QUBITS = 9
DEFAULT_BANDWIDTH = 0.4

# Tasks with the best single-task accuracies
BEST_TASKS = {
    "classical": (21, 17, 16, 7, 23),
    "quantum": (21, 17, 24, 14, 23),
}

PCA_COMPONENTS = 24


@dataclass(frozen=True)
class GridSpec:
    """Candidate hyperparameters (`axes`) plus settings shared by every point (`fixed`)."""
    method: str
    axes: Dict[str, list]
    fixed: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        method = self.method.upper()
        object.__setattr__(self, "method", method)
        if method not in METHODS:
            raise ValueError(f"Unknown method '{self.method}'; expected one of {', '.join(METHODS)}")
        if not self.axes or any(len(values) == 0 for values in self.axes.values()):
            raise ValueError(f"Empty grid for {method}")
        if method == "QSVC":
            if "bandwidth" not in self.axes:
                raise ValueError("QSVC grid needs a bandwidth axis")
            if "n_qubits" not in self.fixed:
                raise ValueError("QSVC grid needs fixed n_qubits")

    def points(self) -> List[dict]:
        """Grid points in axis order (first axis varies slowest)."""
        names = list(self.axes)
        return [dict(zip(names, values)) for values in itertools.product(*self.axes.values())]

    @property
    def size(self) -> int:
        return len(self.points())

    def to_dict(self) -> dict:
        return {"method": self.method, "axes": self.axes, "fixed": self.fixed}


def default_grid(method: str, **fixed) -> GridSpec:
    method = method.upper()
    if method not in DEFAULT_GRIDS:
        raise ValueError(f"Unknown method '{method}'; expected one of {', '.join(METHODS)}")
    if method == "QSVC":
        fixed.setdefault("C", QSVC_C)
        fixed.setdefault("tol", QSVC_TOL)
        fixed.setdefault("execution", EXACT.to_dict())
    return GridSpec(method, {k: list(v) for k, v in DEFAULT_GRIDS[method].items()}, fixed)


def singleton_grid(method: str, params: dict, **fixed) -> GridSpec:
    """Grid with one point, e.g. the modal hyperparameters of a previous run."""
    return GridSpec(method, {k: [v] for k, v in params.items()}, fixed)


def build_classifier(method: str, params: dict, fixed: dict, n_features: int) -> Classifier:
    """Instantiate the classifier for one grid point."""
    method = method.upper()
    if method == "SVC":
        kernel = KernelParams(
            kind=params.get("kernel", "rbf"),
            gamma=params.get("gamma", "scale"),
            coef0=float(fixed.get("coef0", 0.0)),
            degree=int(fixed.get("degree", 3)),
        )
        return SVCClassifier(kernel, C=float(params.get("C", 1.0)), tol=float(params.get("tol", 1e-3)))
    if method == "QSVC":
        circuit = build_ansatz(int(fixed["n_qubits"]), n_features, float(params["bandwidth"]))
        execution = fixed.get("execution", EXACT)
        if isinstance(execution, dict):
            execution = Execution.from_dict(execution)
        return QuantumSVCClassifier(circuit, C=float(fixed.get("C", QSVC_C)),
                                    tol=float(fixed.get("tol", QSVC_TOL)), execution=execution)
    if method == "KNN":
        return KNNClassifier(k=int(params.get("k", 5)), metric=params.get("metric", "euclidean"),
                             weights=params.get("weights", "uniform"), p=float(params.get("p", 2.0)))
    if method == "DT":
        max_depth = params.get("max_depth")
        return TreeClassifier(
            criterion=params.get("criterion", "gini"),
            splitter=params.get("splitter", "best"),
            max_depth=None if max_depth is None else int(max_depth),
            min_samples_split=int(params.get("min_samples_split", 2)),
            min_samples_leaf=int(params.get("min_samples_leaf", 1)),
            seed=int(fixed.get("seed", 0)),
        )
    raise ValueError(f"Unknown method '{method}'")


@dataclass
class SplitResult:
    index: int
    params: dict
    accuracy: float
    test_ids: np.ndarray
    predictions: np.ndarray
    validation_accuracy: Optional[float] = None
    # Test accuracy of each task model on its own, for per-task ensembles
    task_accuracies: Optional[Dict[str, float]] = None

    def to_dict(self) -> dict:
        data = {
            "split": self.index,
            "params": self.params,
            "accuracy": self.accuracy,
            "validation_accuracy": self.validation_accuracy,
            "test_ids": self.test_ids.tolist(),
            "predictions": self.predictions.tolist(),
        }
        if self.task_accuracies is not None:
            data["task_accuracies"] = self.task_accuracies
        return data


@dataclass
class ExperimentReport:
    """Per-split results; the summary statistics are derived from them."""
    name: str
    config: dict
    per_split: List[SplitResult] = field(default_factory=list)

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.accuracy for r in self.per_split])

    @property
    def mean_acc(self) -> float:
        return float(self.accuracies.mean())

    @property
    def std_acc(self) -> float:
        return float(self.accuracies.std())

    @property
    def config_digest(self) -> str:
        return reports.config_digest(self.config)

    def modal_params(self) -> dict:
        return modal_hyperparameters([r.params for r in self.per_split])

    def summary(self) -> str:
        return f"{self.name}: {self.mean_acc:.2f} +/- {self.std_acc:.2f}"

    def task_ranking(self) -> List[dict]:
        """Tasks by their single-model mean test accuracy, best first; ties keep task order."""
        if not self.per_split or any(r.task_accuracies is None for r in self.per_split):
            raise ValueError(f"{self.name} has no per-task accuracies")
        tasks = list(self.per_split[0].task_accuracies)
        ranked = []
        for task in tasks:
            values = np.array([r.task_accuracies[task] for r in self.per_split])
            ranked.append({"task": int(task), "mean_acc": float(values.mean()), "std_acc": float(values.std())})
        ranked.sort(key=lambda row: -row["mean_acc"])
        return [{"rank": i + 1, **row} for i, row in enumerate(ranked)]

    def to_dict(self) -> dict:
        data = {
            "name": self.name,
            "config": self.config,
            "config_digest": self.config_digest,
            "mean_acc": self.mean_acc,
            "std_acc": self.std_acc,
            "per_split": [r.to_dict() for r in self.per_split],
        }
        if self.per_split and self.per_split[0].task_accuracies is not None:
            data["task_ranking"] = self.task_ranking()
        return data

    def rows(self) -> List[dict]:
        """Flat per-split rows for the CSV output."""
        out = []
        for r in self.per_split:
            row = {"experiment": self.name, "split": r.index, "accuracy": r.accuracy,
                   "validation_accuracy": r.validation_accuracy}
            for key, value in r.params.items():
                row[f"param_{key}"] = json.dumps(value) if isinstance(value, (dict, list)) else value
            out.append(row)
        return out


def modal_hyperparameters(chosen) -> dict:
    """Most frequently chosen grid point; ties go to the first one seen.

    Accepts the chosen params per split, an ExperimentReport, or a report
    loaded back from JSON.
    """
    if isinstance(chosen, ExperimentReport):
        chosen = [r.params for r in chosen.per_split]
    elif isinstance(chosen, dict):
        chosen = [r["params"] for r in chosen.get("per_split", [])]
    if not chosen:
        raise ValueError("No chosen hyperparameters to take the mode of")
    counts = Counter(json.dumps(p, sort_keys=True) for p in chosen)
    return json.loads(counts.most_common(1)[0][0])


def best_tasks(report, n: int = 5) -> List[int]:
    """Ids of the n tasks whose single models scored best in a per-task report (or its JSON)."""
    ranking = report.task_ranking() if isinstance(report, ExperimentReport) else report.get("task_ranking")
    if not ranking:
        raise ValueError("Report has no task ranking")
    if not 1 <= n <= len(ranking):
        raise ValueError(f"Cannot pick {n} of {len(ranking)} tasks")
    return [row["task"] for row in ranking[:n]]


def majority_vote(predictions: Sequence[np.ndarray]) -> np.ndarray:
    """Per-sample sign of the vote sum; a tie predicts +1."""
    if len(predictions) == 0:
        raise ValueError("Majority vote needs at least one voter")
    lengths = {len(p) for p in predictions}
    if len(lengths) != 1:
        raise ValueError(f"Voters disagree on the number of samples: {sorted(lengths)}")
    return sign_with_ties(np.sum(np.vstack(predictions), axis=0))


# ---------------------------------------------------------------------------
# Split-level protocol
# ---------------------------------------------------------------------------

def _prepared(data: FeatureMatrix, fit_idx, parts, fitter: Optional[Callable]) -> List[FeatureMatrix]:
    """Row subsets, transformed by a preprocessing fitted on fit_idx when given."""
    if fitter is None:
        return [data.take(p) for p in parts]
    transform = fitter(data.take(fit_idx))
    return [transform.transform(data.take(p)) for p in parts]


def _select_and_predict(data: FeatureMatrix, grid: GridSpec, split, fitter=None):
    """Tune on validation, refit on train + validation, predict the test rows."""
    points = grid.points()
    validation_accuracy = None
    if len(points) == 1 or split.val.size == 0:
        if len(points) > 1:
            raise ValueError(f"{grid.method} grid has {len(points)} points but the split has no validation rows")
        best = points[0]
    else:
        train, val = _prepared(data, split.train, [split.train, split.val], fitter)
        scores = [
            build_classifier(grid.method, p, grid.fixed, train.n_features).fit(train).score(val)
            for p in points
        ]
        best_index = int(np.argmax(scores))  # first maximum
        best = points[best_index]
        validation_accuracy = scores[best_index]

    fit_idx = np.sort(np.concatenate([split.train, split.val]))
    fit, test = _prepared(data, fit_idx, [fit_idx, split.test], fitter)
    clf = build_classifier(grid.method, best, grid.fixed, fit.n_features).fit(fit)
    return best, clf.predict(test), test, validation_accuracy


def _map_splits(func, plan: SplitPlan, jobs: int) -> list:
    """func(i, split) for every split, in split order; threads share the data."""
    indexed = list(enumerate(plan.splits))
    if jobs > 1:
        return Parallel(n_jobs=jobs, prefer="threads")(delayed(func)(i, split) for i, split in indexed)
    return [func(i, split) for i, split in indexed]


def run_grid_cv(data: FeatureMatrix, grid: GridSpec, plan: SplitPlan, name: Optional[str] = None,
                preprocess_k: Optional[int] = None, jobs: int = 1, verbose: bool = True) -> ExperimentReport:
    """Grid search with the train/validation/test protocol on every split.

    With `preprocess_k` the data is raw and the standardize-PCA-standardize
    transform is fitted on each split's fitting rows only.
    """
    if grid.size > 1 and plan.val_frac <= 0:
        raise ValueError("A multi-point grid needs a validation fraction > 0")
    if not plan.splits:
        raise ValueError("Split plan has no splits")

    name = name or grid.method
    fitter = (lambda m: fit_preprocessor(m, preprocess_k)) if preprocess_k else None
    config = {"experiment": name, "grid": grid.to_dict(), "plan": plan.to_dict(), "preprocess_k": preprocess_k}
    report = ExperimentReport(name=name, config=config)

    if verbose:
        print(f"\nRunning {name}: {grid.size} grid point(s) x {plan.n_splits} splits...")

    def _one(i, split):
        best, predictions, test, val_acc = _select_and_predict(data, grid, split, fitter)
        return SplitResult(i, best, accuracy(predictions, test.labels), test.row_ids, predictions, val_acc)

    for result in _map_splits(_one, plan, jobs):
        report.per_split.append(result)
        if verbose:
            print(f"  Split {result.index + 1}/{plan.n_splits}: {result.accuracy:.2f}% {result.params}")

    if verbose:
        print(f"  {report.summary()}")
    return report


def per_task_ensemble(data: FeatureMatrix, grid: GridSpec, plan: SplitPlan, tasks: Sequence[int],
                      name: Optional[str] = None, scale_per_split: bool = False, jobs: int = 1,
                      verbose: bool = True) -> ExperimentReport:
    """One model per task on its 18 standardized features, combined by majority vote."""
    tasks = list(tasks)
    if not tasks:
        raise ValueError("per_task_ensemble needs at least one task")

    if scale_per_split:
        task_data = {t: select_task_features(data, {t}) for t in tasks}
        fitter = fit_scaler
    else:
        task_data = {t: standardize(select_task_features(data, {t}))[0] for t in tasks}
        fitter = None

    name = name or f"{grid.method}-tasks"
    config = {"experiment": name, "grid": grid.to_dict(), "plan": plan.to_dict(), "tasks": tasks,
              "scale_per_split": scale_per_split}
    report = ExperimentReport(name=name, config=config)

    if verbose:
        print(f"\nRunning {name}: {len(tasks)} task model(s) x {plan.n_splits} splits...")

    def _one(i, split):
        chosen, singles, votes, test = {}, {}, [], None
        for t in tasks:
            best, predictions, test, _ = _select_and_predict(task_data[t], grid, split, fitter)
            chosen[str(t)] = best
            singles[str(t)] = accuracy(predictions, test.labels)
            votes.append(predictions)
        combined = majority_vote(votes)
        return SplitResult(i, chosen, accuracy(combined, test.labels), test.row_ids, combined,
                           task_accuracies=singles)

    for result in _map_splits(_one, plan, jobs):
        report.per_split.append(result)
        if verbose:
            print(f"  Split {result.index + 1}/{plan.n_splits}: {result.accuracy:.2f}%")

    if verbose:
        print(f"  {report.summary()}")
    return report


def run_category_subsampling(raw: FeatureMatrix, grid: GridSpec, plan: SplitPlan,
                             categories: Sequence[str] = ("C", "G", "M"), k: int = PCA_COMPONENTS,
                             pca_per_split: bool = False, jobs: int = 1,
                             verbose: bool = True) -> Dict[str, ExperimentReport]:
    """Restrict to the tasks of one category at a time and rerun the protocol."""
    results = {}
    for category in categories:
        tasks = category_tasks(category)
        subset = select_task_features(raw, tasks)
        label = CATEGORY_NAMES[category.upper()[:1]]
        if pca_per_split:
            results[label] = run_grid_cv(subset, grid, plan, name=f"{grid.method}-{label}",
                                         preprocess_k=k, jobs=jobs, verbose=verbose)
        else:
            results[label] = run_grid_cv(preprocess(subset, k), grid, plan, name=f"{grid.method}-{label}",
                                         jobs=jobs, verbose=verbose)
    return results


# ---------------------------------------------------------------------------
# Noise study
# ---------------------------------------------------------------------------

@dataclass
class NoiseResult:
    n_qubits: int
    baseline_accuracy: float
    run_accuracies: List[float]
    vote_accuracy: float

    @property
    def median_run_accuracy(self) -> float:
        return float(np.median(self.run_accuracies))

    @property
    def vote_ge_median(self) -> bool:
        return self.vote_accuracy >= self.median_run_accuracy

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "baseline_accuracy": self.baseline_accuracy,
            "run_accuracies": self.run_accuracies,
            "median_run_accuracy": self.median_run_accuracy,
            "vote_accuracy": self.vote_accuracy,
            "vote_ge_median": self.vote_ge_median,
        }


@dataclass
class NoiseStudyReport:
    config: dict
    results: List[NoiseResult] = field(default_factory=list)

    @property
    def config_digest(self) -> str:
        return reports.config_digest(self.config)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "config_digest": self.config_digest,
            "results": [r.to_dict() for r in self.results],
        }

    def rows(self) -> List[dict]:
        out = []
        for r in self.results:
            out.append({"n_qubits": r.n_qubits, "run": "noiseless", "accuracy": r.baseline_accuracy})
            for i, acc in enumerate(r.run_accuracies):
                out.append({"n_qubits": r.n_qubits, "run": str(i + 1), "accuracy": acc})
            out.append({"n_qubits": r.n_qubits, "run": "majority", "accuracy": r.vote_accuracy})
        return out


def noise_study(data: FeatureMatrix, specs: Sequence[CircuitSpec], noise: NoiseModel, n_runs: int,
                plan: SplitPlan, C: float = QSVC_C, tol: float = QSVC_TOL, jobs: int = 1,
                verbose: bool = True) -> NoiseStudyReport:
    """Shot-sampled noiseless baseline plus `n_runs` noisy executions per circuit.

    All runs use the first split of `plan`; run r uses noise seed rng_seed + 1 + r.
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    split = plan.splits[0]
    fit_idx = np.sort(np.concatenate([split.train, split.val]))
    train, test = data.take(fit_idx), data.take(split.test)

    config = {"experiment": "noise", "noise": noise.to_dict(), "n_runs": n_runs, "plan": plan.to_dict(),
              "circuits": [s.to_dict() for s in specs], "C": C, "tol": tol}
    study = NoiseStudyReport(config=config)

    for spec in specs:
        if verbose:
            print(f"\nNoise study, {spec.n_qubits} qubits...")
        baseline_exec = Execution("shots", shots=noise.shots, seed=noise.rng_seed)
        baseline = QuantumSVCClassifier(spec, C, tol, baseline_exec, jobs).fit(train).predict(test)
        baseline_acc = accuracy(baseline, test.labels)
        if verbose:
            print(f"  Noiseless ({noise.shots} shots): {baseline_acc:.2f}%")

        runs, run_accs = [], []
        for r in range(n_runs):
            run_noise = noise.with_seed(noise.rng_seed + 1 + r)
            execution = Execution("noisy", shots=noise.shots, seed=run_noise.rng_seed, noise=run_noise)
            predictions = QuantumSVCClassifier(spec, C, tol, execution, jobs).fit(train).predict(test)
            runs.append(predictions)
            run_accs.append(accuracy(predictions, test.labels))
            if verbose:
                print(f"  Noisy run {r + 1}/{n_runs}: {run_accs[-1]:.2f}%")

        vote_acc = accuracy(majority_vote(runs), test.labels)
        if verbose:
            print(f"  Majority vote: {vote_acc:.2f}%")
        study.results.append(NoiseResult(spec.n_qubits, baseline_acc, run_accs, vote_acc))

    return study


# ---------------------------------------------------------------------------
# Gram spectra
# ---------------------------------------------------------------------------

def gram_spectra(data: FeatureMatrix, qubit_counts: Sequence[int], bandwidth: float = DEFAULT_BANDWIDTH,
                 execution: Execution = EXACT, jobs: int = 1, save_dir=None,
                 verbose: bool = True) -> Dict[int, Spectrum]:
    """Eigenvalue curve of the full quantum Gram for each circuit width.

    With `save_dir` each Gram is also written as gram_<n>q.npy + .json.
    """
    spectra = {}
    for n_qubits in qubit_counts:
        circuit = build_ansatz(n_qubits, data.n_features, bandwidth)
        g = gram(data, data, KernelParams(kind="quantum", circuit=circuit), execution, jobs)
        spectra[n_qubits] = spectrum(g)
        if save_dir is not None:
            save_gram(g, Path(save_dir) / f"gram_{n_qubits}q")
        if verbose:
            s = spectra[n_qubits]
            print(f"  {n_qubits} qubits: lambda_1 = {s.eigenvalues[0]:.4g}, "
                  f"min = {s.min_eigenvalue:.3g}, negative = {s.n_negative}")
    return spectra
