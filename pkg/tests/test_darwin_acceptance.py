"""Published accuracies on the real DARWIN table; skipped unless DARWIN_CSV is set.

These runs take minutes each.
"""

import numpy as np
import pytest

from darwin_data import load_darwin, make_splits, preprocess
from evaluation import (
    BEST_TASKS,
    PER_TASK_QUBITS,
    default_grid,
    noise_study,
    per_task_ensemble,
    run_category_subsampling,
    run_grid_cv,
    singleton_grid,
)
from quantum import NoiseModel, build_ansatz

TOLERANCE = 5.0
N_SPLITS = 20
JOBS = 4

CLASSICAL_MAIN = {"SVC": 85.28, "KNN": 69.57, "DT": 73.57}
QUANTUM_MAIN = {6: 83.57, 8: 83.14, 12: 88.29}
CATEGORY_MEANS = {
    "SVC": {"Copy": 85.57, "Graphic": 78.14, "Memory": 79.28},
    "QSVC": {"Copy": 85.71, "Graphic": 81.29, "Memory": 78.57},
}
TASK_ENSEMBLES = {
    ("SVC", "all"): 85.71,
    ("SVC", "best"): 80.28,
    ("QSVC", "all"): 86.00,
    ("QSVC", "best"): 81.35,
}


@pytest.fixture
def raw(real_darwin_csv):
    return load_darwin(real_darwin_csv)


@pytest.fixture
def tuning_plan(raw):
    return make_splits(raw.n_samples, 0.6, 0.2, 0.2, n_splits=N_SPLITS, seed=0)


@pytest.fixture
def holdout_plan(raw):
    return make_splits(raw.n_samples, 0.8, 0.0, 0.2, n_splits=N_SPLITS, seed=0)


def main_grid(method):
    return default_grid("QSVC", n_qubits=12) if method == "QSVC" else default_grid(method)


@pytest.mark.parametrize("method", sorted(CLASSICAL_MAIN))
def test_classical_main_table(raw, tuning_plan, method):
    report = run_grid_cv(preprocess(raw, 24), default_grid(method), tuning_plan, jobs=JOBS, verbose=False)
    assert report.mean_acc == pytest.approx(CLASSICAL_MAIN[method], abs=TOLERANCE)


@pytest.mark.parametrize("n_qubits", sorted(QUANTUM_MAIN))
def test_quantum_main_table(raw, tuning_plan, n_qubits):
    grid = default_grid("QSVC", n_qubits=n_qubits)
    report = run_grid_cv(preprocess(raw, 24), grid, tuning_plan, jobs=JOBS, verbose=False)
    assert report.mean_acc == pytest.approx(QUANTUM_MAIN[n_qubits], abs=TOLERANCE)


@pytest.mark.parametrize("method", sorted(CATEGORY_MEANS))
def test_category_subsampling_table(raw, tuning_plan, holdout_plan, method):
    grid = main_grid(method)
    tuned = run_grid_cv(preprocess(raw, 24), grid, tuning_plan, jobs=JOBS, verbose=False)
    fixed = singleton_grid(method, tuned.modal_params(), **grid.fixed)
    results = run_category_subsampling(raw, fixed, holdout_plan, jobs=JOBS, verbose=False)
    for category, expected in CATEGORY_MEANS[method].items():
        assert results[category].mean_acc == pytest.approx(expected, abs=TOLERANCE), category


@pytest.mark.parametrize("method, tasks", sorted(TASK_ENSEMBLES))
def test_per_task_ensemble_table(raw, tuning_plan, method, tasks):
    if method == "QSVC":
        grid = default_grid("QSVC", n_qubits=PER_TASK_QUBITS)
        best = BEST_TASKS["quantum"]
    else:
        grid = default_grid("SVC")
        best = BEST_TASKS["classical"]
    chosen = list(range(1, 26)) if tasks == "all" else list(best)
    report = per_task_ensemble(raw, grid, tuning_plan, chosen, jobs=JOBS, verbose=False)
    assert report.mean_acc == pytest.approx(TASK_ENSEMBLES[(method, tasks)], abs=TOLERANCE)


@pytest.mark.parametrize("n_qubits", [6, 8])
def test_noisy_majority_vote_beats_median_run(raw, n_qubits):
    data = preprocess(raw, 24)
    plan = make_splits(raw.n_samples, 0.8, 0.0, 0.2, n_splits=1, seed=0)
    study = noise_study(data, [build_ansatz(n_qubits, 24)], NoiseModel(), 20, plan, jobs=JOBS, verbose=False)
    result = study.results[0]
    assert len(result.run_accuracies) == 20
    assert result.median_run_accuracy == pytest.approx(np.median(result.run_accuracies))
    assert result.vote_ge_median
