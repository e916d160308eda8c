import numpy as np
import pytest

import reports
from classifiers import KNNClassifier, QuantumSVCClassifier, SVCClassifier, TreeClassifier
from darwin_data import load_darwin, make_splits, preprocess, select_task_features, standardize
from evaluation import (
    BEST_TASKS,
    DEFAULT_GRIDS,
    ExperimentReport,
    GridSpec,
    SplitResult,
    best_tasks,
    build_classifier,
    default_grid,
    gram_spectra,
    majority_vote,
    modal_hyperparameters,
    noise_study,
    per_task_ensemble,
    run_category_subsampling,
    run_grid_cv,
    singleton_grid,
)
from kernels import Execution
from quantum import NoiseModel, build_ansatz


@pytest.fixture
def reduced(darwin_matrix):
    return preprocess(darwin_matrix, 4)


@pytest.fixture
def plan():
    return make_splits(22, 0.6, 0.2, 0.2, n_splits=3, seed=1)


def test_grid_points_follow_axis_order():
    grid = GridSpec("knn", {"k": [1, 3], "metric": ["euclidean", "manhattan"]})
    assert grid.method == "KNN"
    assert grid.points() == [
        {"k": 1, "metric": "euclidean"},
        {"k": 1, "metric": "manhattan"},
        {"k": 3, "metric": "euclidean"},
        {"k": 3, "metric": "manhattan"},
    ]


def test_grid_validation():
    with pytest.raises(ValueError, match="Empty grid"):
        GridSpec("SVC", {"C": []})
    with pytest.raises(ValueError, match="Unknown method"):
        GridSpec("RF", {"n": [1]})
    with pytest.raises(ValueError, match="bandwidth"):
        GridSpec("QSVC", {"C": [1.0]}, {"n_qubits": 2})
    with pytest.raises(ValueError, match="n_qubits"):
        default_grid("QSVC")


def test_default_grid_sizes():
    assert default_grid("SVC").size == 128
    assert default_grid("KNN").size == 20
    assert default_grid("DT").size == 144
    qsvc = default_grid("QSVC", n_qubits=12)
    assert qsvc.size == len(DEFAULT_GRIDS["QSVC"]["bandwidth"]) == 6
    assert qsvc.fixed["C"] == 1.0
    assert qsvc.fixed["execution"]["mode"] == "exact"


def test_build_classifier():
    assert isinstance(build_classifier("SVC", {"kernel": "poly", "C": 10, "gamma": 0.01, "tol": 1e-4}, {}, 24),
                      SVCClassifier)
    assert isinstance(build_classifier("KNN", {"k": 7}, {}, 24), KNNClassifier)
    assert isinstance(build_classifier("DT", {"max_depth": None}, {}, 24), TreeClassifier)

    execution = Execution("shots", shots=64, seed=2).to_dict()
    qsvc = build_classifier("QSVC", {"bandwidth": 0.4}, {"n_qubits": 6, "execution": execution}, 24)
    assert isinstance(qsvc, QuantumSVCClassifier)
    assert qsvc.kernel.circuit.n_qubits == 6
    assert qsvc.kernel.circuit.n_params == 24
    assert qsvc.execution.mode == "shots"


def test_majority_vote():
    np.testing.assert_array_equal(majority_vote([np.array([1]), np.array([1]), np.array([-1])]), [1])
    np.testing.assert_array_equal(majority_vote([np.array([1, -1]), np.array([-1, -1])]), [1, -1])
    unanimous = [np.array([1, -1, -1])] * 20
    np.testing.assert_array_equal(majority_vote(unanimous), [1, -1, -1])


def test_majority_vote_errors():
    with pytest.raises(ValueError, match="at least one"):
        majority_vote([])
    with pytest.raises(ValueError, match="disagree"):
        majority_vote([np.array([1]), np.array([1, -1])])


def test_modal_hyperparameters():
    chosen = [{"k": 3}, {"k": 5}, {"k": 5}, {"k": 3}, {"k": 7}]
    assert modal_hyperparameters(chosen) == {"k": 3}
    assert modal_hyperparameters(chosen + [{"k": 5}]) == {"k": 5}
    with pytest.raises(ValueError):
        modal_hyperparameters([])


def test_singleton_grid_equals_direct_fit(reduced, plan):
    grid = singleton_grid("KNN", {"k": 3})
    report = run_grid_cv(reduced, grid, plan, verbose=False)

    for split, result in zip(plan.splits, report.per_split):
        fit_idx = np.sort(np.concatenate([split.train, split.val]))
        direct = KNNClassifier(k=3).fit(reduced.take(fit_idx)).predict(reduced.take(split.test))
        np.testing.assert_array_equal(result.predictions, direct)
        assert result.validation_accuracy is None


def test_run_grid_cv_report(reduced, plan):
    grid = GridSpec("KNN", {"k": [1, 3, 5], "weights": ["uniform", "distance"]})
    report = run_grid_cv(reduced, grid, plan, verbose=False)

    assert len(report.per_split) == 3
    assert all(r.params in grid.points() for r in report.per_split)
    assert report.mean_acc == pytest.approx(np.mean([r.accuracy for r in report.per_split]), abs=1e-9)
    assert report.std_acc == pytest.approx(np.std([r.accuracy for r in report.per_split]), abs=1e-9)
    np.testing.assert_array_equal(report.per_split[0].test_ids, plan.splits[0].test)


def test_tree_grid_separates_synthetic_classes(reduced, plan):
    report = run_grid_cv(reduced, default_grid("DT"), plan, verbose=False)
    assert report.mean_acc >= 90.0


def test_run_grid_cv_threads_do_not_change_results(reduced, plan):
    grid = GridSpec("DT", {"max_depth": [1, 3], "splitter": ["best", "random"]})
    serial = run_grid_cv(reduced, grid, plan, verbose=False)
    threaded = run_grid_cv(reduced, grid, plan, jobs=3, verbose=False)
    assert serial.to_dict() == threaded.to_dict()


def test_run_grid_cv_prints_progress(reduced, plan, capsys):
    run_grid_cv(reduced, singleton_grid("KNN", {"k": 3}), plan, name="kNN-test")
    out = capsys.readouterr().out
    assert "Running kNN-test" in out
    assert "Split 3/3" in out


def test_multi_point_grid_needs_validation_rows(reduced):
    holdout = make_splits(22, 0.8, 0.0, 0.2, n_splits=2, seed=0)
    with pytest.raises(ValueError, match="validation"):
        run_grid_cv(reduced, GridSpec("KNN", {"k": [1, 3]}), holdout, verbose=False)
    report = run_grid_cv(reduced, singleton_grid("KNN", {"k": 3}), holdout, verbose=False)
    assert len(report.per_split) == 2


def test_preprocessing_fitted_per_split(darwin_matrix, plan):
    report = run_grid_cv(darwin_matrix, singleton_grid("KNN", {"k": 3}), plan, preprocess_k=4, verbose=False)
    assert report.config["preprocess_k"] == 4
    assert len(report.per_split) == 3


def test_quantum_grid_search(reduced, plan):
    grid = GridSpec("QSVC", {"bandwidth": [0.2, 0.4]}, {"n_qubits": 2})
    report = run_grid_cv(reduced, grid, plan, verbose=False)
    assert {r.params["bandwidth"] for r in report.per_split} <= {0.2, 0.4}
    assert all(r.validation_accuracy is not None for r in report.per_split)


def test_report_serialization(reduced, plan, tmp_path):
    report = run_grid_cv(reduced, GridSpec("KNN", {"k": [1, 3]}), plan, name="KNN", verbose=False)
    data = report.to_dict()
    assert data["config_digest"] == reports.config_digest(report.config)
    assert len(data["per_split"]) == 3

    rows = report.rows()
    assert rows[0]["experiment"] == "KNN"
    assert "param_k" in rows[0]

    path = reports.write_json(tmp_path / "KNN.json", data)
    assert modal_hyperparameters(reports.load_json(path)) == report.modal_params()


def test_identical_runs_give_identical_json(reduced, plan):
    grid = GridSpec("DT", {"splitter": ["random"], "max_depth": [2, None]})
    first = reports.dumps(run_grid_cv(reduced, grid, plan, verbose=False).to_dict())
    second = reports.dumps(run_grid_cv(reduced, grid, plan, verbose=False).to_dict())
    assert first == second


def test_single_task_ensemble_matches_plain_run(darwin_matrix, plan):
    grid = GridSpec("KNN", {"k": [1, 3]})
    ensemble = per_task_ensemble(darwin_matrix, grid, plan, [7], verbose=False)
    task_data = standardize(select_task_features(darwin_matrix, [7]))[0]
    plain = run_grid_cv(task_data, grid, plan, verbose=False)
    np.testing.assert_array_equal(ensemble.accuracies, plain.accuracies)


def test_per_task_ensemble_records_each_task(darwin_matrix, plan):
    grid = GridSpec("KNN", {"k": [3]})
    report = per_task_ensemble(darwin_matrix, grid, plan, BEST_TASKS["classical"], verbose=False)
    assert set(report.per_split[0].params) == {"7", "16", "17", "21", "23"}
    assert all(set(p) == {"k"} for p in report.per_split[0].params.values())


def test_per_task_ensemble_ranks_single_tasks(darwin_matrix, plan, tmp_path):
    report = per_task_ensemble(darwin_matrix, GridSpec("DT", {"max_depth": [2]}), plan, [7, 16, 17],
                               verbose=False)
    assert all(set(r.task_accuracies) == {"7", "16", "17"} for r in report.per_split)

    ranking = report.task_ranking()
    assert [row["rank"] for row in ranking] == [1, 2, 3]
    assert sorted(row["task"] for row in ranking) == [7, 16, 17]
    means = [row["mean_acc"] for row in ranking]
    assert means == sorted(means, reverse=True)
    expected = np.mean([r.task_accuracies[str(ranking[0]["task"])] for r in report.per_split])
    assert means[0] == pytest.approx(expected)

    assert best_tasks(report, 2) == [ranking[0]["task"], ranking[1]["task"]]
    reports.write_json(tmp_path / "tasks.json", report.to_dict())
    loaded = reports.load_json(tmp_path / "tasks.json")
    assert loaded["task_ranking"] == ranking
    assert best_tasks(loaded, 3) == [row["task"] for row in ranking]


def test_best_tasks_needs_a_per_task_report(reduced, plan, darwin_matrix):
    plain = run_grid_cv(reduced, GridSpec("KNN", {"k": [3]}), plan, verbose=False)
    assert "task_ranking" not in plain.to_dict()
    with pytest.raises(ValueError, match="per-task"):
        plain.task_ranking()
    with pytest.raises(ValueError, match="task ranking"):
        best_tasks(plain.to_dict())

    report = per_task_ensemble(darwin_matrix, GridSpec("KNN", {"k": [3]}), plan, [7, 16], verbose=False)
    with pytest.raises(ValueError, match="Cannot pick 5 of 2"):
        best_tasks(report)


def test_per_task_quantum_ensemble(darwin_matrix):
    plan = make_splits(22, 0.6, 0.2, 0.2, n_splits=1, seed=2)
    grid = GridSpec("QSVC", {"bandwidth": [0.4]}, {"n_qubits": 9})
    report = per_task_ensemble(darwin_matrix, grid, plan, [21, 17, 24], scale_per_split=True, verbose=False)
    assert len(report.per_split) == 1
    assert 0.0 <= report.mean_acc <= 100.0


def test_per_task_ensemble_needs_tasks(darwin_matrix, plan):
    with pytest.raises(ValueError, match="at least one task"):
        per_task_ensemble(darwin_matrix, GridSpec("KNN", {"k": [3]}), plan, [], verbose=False)


def test_category_subsampling(darwin_matrix):
    holdout = make_splits(22, 0.8, 0.0, 0.2, n_splits=2, seed=0)
    results = run_category_subsampling(darwin_matrix, singleton_grid("KNN", {"k": 3}), holdout, k=4, verbose=False)
    assert list(results) == ["Copy", "Graphic", "Memory"]
    for name, report in results.items():
        assert report.name == f"KNN-{name}"
        assert len(report.per_split) == 2


def test_noise_study(reduced):
    holdout = make_splits(22, 0.8, 0.0, 0.2, n_splits=1, seed=0)
    noise = NoiseModel(shots=64, rng_seed=5)
    study = noise_study(reduced, [build_ansatz(2, 4)], noise, 3, holdout, verbose=False)

    assert len(study.results) == 1
    result = study.results[0]
    assert result.n_qubits == 2
    assert len(result.run_accuracies) == 3
    assert result.median_run_accuracy == pytest.approx(np.median(result.run_accuracies))
    assert result.vote_ge_median == (result.vote_accuracy >= result.median_run_accuracy)
    assert study.to_dict()["results"][0]["vote_ge_median"] is result.vote_ge_median
    assert [row["run"] for row in study.rows()] == ["noiseless", "1", "2", "3", "majority"]


def test_noise_study_single_run_vote_equals_run(reduced):
    holdout = make_splits(22, 0.8, 0.0, 0.2, n_splits=1, seed=0)
    study = noise_study(reduced, [build_ansatz(2, 4)], NoiseModel(shots=32), 1, holdout, verbose=False)
    result = study.results[0]
    assert result.vote_accuracy == result.run_accuracies[0]

    with pytest.raises(ValueError, match="n_runs"):
        noise_study(reduced, [build_ansatz(2, 4)], NoiseModel(), 0, holdout, verbose=False)


def test_gram_spectra(reduced, tmp_path):
    spectra = gram_spectra(reduced, [2, 4], bandwidth=0.4, save_dir=tmp_path, verbose=False)
    assert set(spectra) == {2, 4}
    for s in spectra.values():
        assert s.eigenvalues.size == 22
        assert s.is_psd
        assert np.all(np.diff(s.eigenvalues) <= 1e-12)
    assert (tmp_path / "gram_4q.npy").is_file()
    assert (tmp_path / "gram_4q.json").is_file()


def test_split_result_serialization():
    result = SplitResult(0, {"k": 3}, 75.0, np.array([4, 9]), np.array([1, -1]))
    assert result.to_dict()["test_ids"] == [4, 9]
    report = ExperimentReport("x", {"a": 1}, [result])
    assert report.summary() == "x: 75.00 +/- 0.00"


def test_real_darwin_spectra_decay(real_darwin_csv):
    data = preprocess(load_darwin(real_darwin_csv), 24)
    spectra = gram_spectra(data, [6, 8, 12], verbose=False)
    for s in spectra.values():
        assert s.min_eigenvalue >= -1e-8
        ratio = s.decay_ratio(100)
        assert ratio is None or ratio >= 10
