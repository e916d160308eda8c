import itertools

import numpy as np
import pytest

from classifiers import (
    KNNClassifier,
    KnnModel,
    QuantumSVCClassifier,
    SVCClassifier,
    SvmModel,
    TreeClassifier,
    TreeLimits,
    TreeModel,
    accuracy,
    impurity,
    knn_predict,
    pairwise_distances,
    sign_with_ties,
    svm_decision_function,
    svm_dual_objective,
    svm_fit,
    svm_predict,
    tree_fit,
    tree_predict,
)
from darwin_data import FeatureMatrix, preprocess
from kernels import GramMatrix, KernelParams, gram
from quantum import build_ansatz

RBF = KernelParams(kind="rbf", gamma=0.5)


def matrix(data, labels, row_ids=None) -> FeatureMatrix:
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    return FeatureMatrix(data, np.asarray(labels), tuple(f"f{i}" for i in range(data.shape[1])), row_ids)


def brute_force_dual(K, y, C):
    """Best feasible KKT point over every (zero, C, free) assignment of the alphas."""
    n = y.size
    Q = np.outer(y, y) * K
    best_alpha, best_bias, best_obj = None, None, -np.inf
    for states in itertools.product((0, 1, 2), repeat=n):
        alpha = np.where(np.array(states) == 1, C, 0.0)
        free = np.flatnonzero(np.array(states) == 2)
        bias = None
        if free.size:
            m = free.size
            A = np.zeros((m + 1, m + 1))
            A[:m, :m] = Q[np.ix_(free, free)]
            A[:m, m] = y[free]
            A[m, :m] = y[free]
            rhs = np.append(1.0 - Q[free] @ alpha, -(y @ alpha))
            solution = np.linalg.lstsq(A, rhs, rcond=None)[0]
            alpha[free] = solution[:m]
            bias = solution[m]
        if abs(y @ alpha) > 1e-9 or alpha.min() < -1e-9 or alpha.max() > C + 1e-9:
            continue
        objective = svm_dual_objective(alpha, K, y)
        if objective > best_obj:
            best_alpha, best_bias, best_obj = alpha, bias, objective
    return best_alpha, best_bias, best_obj


def test_sign_with_ties_and_accuracy():
    np.testing.assert_array_equal(sign_with_ties(np.array([-0.1, 0.0, 2.0])), [-1, 1, 1])
    assert accuracy(np.array([1, -1, 1, 1]), np.array([1, -1, -1, 1])) == 75.0
    with pytest.raises(ValueError):
        accuracy(np.array([1]), np.array([1, -1]))


@pytest.mark.parametrize("seed", range(50))
def test_smo_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(5, 2))
    y = np.array([1, -1, 1, -1, 1])[rng.permutation(5)]
    C = float(rng.choice([0.5, 1.0, 10.0]))
    train = matrix(X, y)
    g = gram(train, train, RBF)

    model = svm_fit(g, y, C=C, tol=1e-6)
    oracle_alpha, oracle_bias, oracle_obj = brute_force_dual(g.values, y.astype(float), C)
    assert svm_dual_objective(model.alphas, g.values, y) == pytest.approx(oracle_obj, abs=1e-4)

    if oracle_bias is not None:
        queries = matrix(rng.normal(size=(20, 2)), np.ones(20, dtype=int), row_ids=np.arange(100, 120))
        g_test = gram(queries, train, RBF)
        oracle_scores = g_test.values @ (oracle_alpha * y) + oracle_bias
        clear = np.abs(oracle_scores) > 1e-3
        np.testing.assert_array_equal(svm_predict(model, g_test)[clear], sign_with_ties(oracle_scores)[clear])


def test_smo_model_satisfies_constraints():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(30, 3))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=30) > 0, 1, -1)
    train = matrix(X, y)
    model = svm_fit(gram(train, train, RBF), y, C=1.0)

    assert np.all((model.alphas >= 0) & (model.alphas <= 1.0))
    assert abs(np.sum(model.alphas * y)) < 1e-6
    np.testing.assert_array_equal(model.support_idx, np.flatnonzero(model.alphas > 1e-8))
    model.check()


def test_svm_separable_linear_problem():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([-1, -1, 1, 1])
    train = matrix(X, y)
    linear = KernelParams(kind="linear", gamma=1.0)
    model = svm_fit(gram(train, train, linear), y, C=100.0, tol=1e-6)

    queries = matrix([[-0.5], [0.5], [3.0]], [-1, 1, 1], row_ids=[10, 11, 12])
    scores = svm_decision_function(model, gram(queries, train, linear))
    np.testing.assert_allclose(scores, [-0.5, 0.5, 3.0], atol=1e-4)
    assert model.n_iter > 0


def test_svm_two_point_bias():
    train = matrix([[0.0], [1.0]], [-1, 1])
    linear = KernelParams(kind="linear", gamma=1.0)
    model = svm_fit(gram(train, train, linear), train.labels, C=10.0, tol=1e-6)
    np.testing.assert_allclose(model.alphas, [2.0, 2.0], atol=1e-6)
    assert model.bias == pytest.approx(-1.0, abs=1e-6)
    scores = svm_decision_function(model, gram(matrix([[0.0], [0.5], [1.0]], [-1, 1, 1], row_ids=[5, 6, 7]),
                                               train, linear))
    np.testing.assert_allclose(scores, [-1.0, 0.0, 1.0], atol=1e-6)


def test_svm_predictions_ignore_training_order():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(15, 2))
    y = np.where(X[:, 0] - X[:, 1] > 0, 1, -1)
    train = matrix(X, y)
    queries = matrix(rng.normal(size=(30, 2)), np.ones(30, dtype=int), row_ids=np.arange(100, 130))

    model = svm_fit(gram(train, train, RBF), train.labels, C=1.0, tol=1e-8)
    scores = svm_decision_function(model, gram(queries, train, RBF))

    perm = rng.permutation(15)
    shuffled = train.take(perm)
    refit = svm_fit(gram(shuffled, shuffled, RBF), shuffled.labels, C=1.0, tol=1e-8)
    refit_scores = svm_decision_function(refit, gram(queries, shuffled, RBF))
    np.testing.assert_allclose(refit_scores, scores, atol=1e-3)
    clear = np.abs(scores) > 1e-2
    np.testing.assert_array_equal(svm_predict(refit, gram(queries, shuffled, RBF))[clear],
                                  svm_predict(model, gram(queries, train, RBF))[clear])

    # Same solution with its support vectors stored in another order
    g_test = gram(queries, train, RBF)
    reordered = SvmModel(model.alphas[perm], model.bias, np.flatnonzero(model.alphas[perm] > 1e-8),
                         model.train_labels[perm], model.C, model.tol, model.params, model.train_ids[perm])
    g_reordered = GramMatrix(g_test.values[:, perm], g_test.row_ids, g_test.col_ids[perm], RBF)
    np.testing.assert_allclose(svm_decision_function(reordered, g_reordered), scores, atol=1e-12)
    np.testing.assert_array_equal(svm_predict(reordered, g_reordered), svm_predict(model, g_test))


def test_svm_fit_rejects_bad_input():
    train = matrix([[0.0], [1.0]], [1, 1])
    with pytest.raises(ValueError, match="both classes"):
        svm_fit(gram(train, train, RBF), train.labels)

    g = GramMatrix(np.array([[1.0, 0.2], [0.3, 1.0]]), np.arange(2), np.arange(2), RBF)
    with pytest.raises(ValueError, match="symmetric"):
        svm_fit(g, np.array([1, -1]))

    train = matrix([[0.0], [1.0]], [1, -1])
    with pytest.raises(ValueError, match="positive"):
        svm_fit(gram(train, train, RBF), train.labels, C=0.0)


def test_svm_iteration_cap_warns(capsys):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(20, 2))
    y = np.where(rng.normal(size=20) > 0, 1, -1)
    y[:2] = [1, -1]
    train = matrix(X, y)
    model = svm_fit(gram(train, train, RBF), y, C=10.0, tol=1e-9, max_iter=2)
    assert model.n_iter == 2
    assert "Warning: SMO stopped after 2 iterations" in capsys.readouterr().out


def test_decision_function_checks_training_ids():
    train = matrix([[0.0], [1.0], [2.0]], [-1, 1, 1])
    model = svm_fit(gram(train, train, RBF), train.labels)
    other = matrix([[0.0], [1.0], [2.0]], [-1, 1, 1], row_ids=[5, 6, 7])
    with pytest.raises(ValueError, match="do not match"):
        svm_decision_function(model, gram(matrix([[0.5]], [1]), other, RBF))


def test_svm_model_serialization():
    train = matrix([[0.0], [1.0], [2.0], [3.0]], [-1, -1, 1, 1])
    model = svm_fit(gram(train, train, RBF), train.labels)
    restored = SvmModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(restored.alphas, model.alphas)
    assert restored.bias == model.bias
    assert restored.params == model.params


def test_svc_classifier_on_synthetic_darwin(darwin_matrix):
    data = preprocess(darwin_matrix, 1)
    clf = SVCClassifier(KernelParams(kind="rbf"), C=1.0).fit(data)
    assert clf.score(data) == 100.0
    assert clf.model.params.gamma != "scale"


def test_quantum_svc_classifier(darwin_matrix):
    data = preprocess(darwin_matrix, 4)
    train, test = data.take(range(16)), data.take(range(16, 22))
    clf = QuantumSVCClassifier(build_ansatz(2, 4, bandwidth=0.4)).fit(train)
    predictions = clf.predict(test)
    assert predictions.shape == (6,)
    assert set(np.unique(predictions)) <= {-1, 1}
    assert QuantumSVCClassifier.METHOD_NAME == "QSVC"


def test_classifier_predict_before_fit():
    with pytest.raises(ValueError, match="before fit"):
        SVCClassifier(RBF).predict(matrix([[0.0]], [1]))


def test_pairwise_distances():
    A = np.array([[0.0, 0.0]])
    B = np.array([[3.0, 4.0], [1.0, 1.0]])
    np.testing.assert_allclose(pairwise_distances(A, B, "euclidean"), [[5.0, np.sqrt(2)]])
    np.testing.assert_allclose(pairwise_distances(A, B, "manhattan"), [[7.0, 2.0]])
    np.testing.assert_allclose(pairwise_distances(A, B, "minkowski", p=3), [[(27 + 64) ** (1 / 3), 2 ** (1 / 3)]])


def test_knn_majority():
    train = matrix([0.0, 1.0, 2.0, 10.0, 11.0, 12.0], [-1, -1, -1, 1, 1, 1])
    queries = matrix([0.5, 11.5], [-1, 1], row_ids=[20, 21])
    np.testing.assert_array_equal(KNNClassifier(k=3).fit(train).predict(queries), [-1, 1])


def test_knn_tied_vote_predicts_patient():
    train = matrix([0.0, 2.0], [-1, 1])
    assert knn_predict(KnnModel(train, k=2), matrix([1.0], [1]))[0] == 1


def test_knn_distance_weights():
    train = matrix([0.0, 3.0, 3.5], [1, -1, -1])
    query = matrix([0.1], [1])
    assert knn_predict(KnnModel(train, k=3, weights="uniform"), query)[0] == -1
    assert knn_predict(KnnModel(train, k=3, weights="distance"), query)[0] == 1


def test_knn_with_every_neighbour_predicts_global_majority():
    train = matrix([0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0], [-1, -1, -1, -1, 1, 1, 1])
    queries = matrix(np.linspace(-5, 20, 11), np.ones(11, dtype=int), row_ids=np.arange(50, 61))
    np.testing.assert_array_equal(knn_predict(KnnModel(train, k=7), queries), -np.ones(11, dtype=int))


@pytest.mark.parametrize("metric", ["euclidean", "manhattan"])
def test_knn_matches_exhaustive_neighbour_search(metric):
    rng = np.random.default_rng(15)
    X = rng.normal(size=(20, 3))
    y = np.where(rng.random(20) > 0.5, 1, -1)
    train = matrix(X, y)
    Q = rng.normal(size=(25, 3))

    expected = []
    for q in Q:
        if metric == "euclidean":
            dist = [float(np.sqrt(np.sum((q - x) ** 2))) for x in X]
        else:
            dist = [float(np.sum(np.abs(q - x))) for x in X]
        nearest = sorted(range(20), key=lambda i: (dist[i], i))[:5]
        expected.append(1 if sum(y[i] for i in nearest) >= 0 else -1)

    queries = matrix(Q, np.ones(25, dtype=int), row_ids=np.arange(100, 125))
    np.testing.assert_array_equal(knn_predict(KnnModel(train, k=5, metric=metric), queries), expected)


def test_knn_model_serialization(darwin_matrix):
    data = preprocess(darwin_matrix, 3)
    train, test = data.take(range(2, 18)), data.take([0, 1, 18, 19, 20, 21])
    model = KnnModel(train, k=3, metric="manhattan", weights="distance")
    restored = KnnModel.from_dict(model.to_dict(), data)
    np.testing.assert_array_equal(restored.train.row_ids, train.row_ids)
    assert restored.to_dict() == model.to_dict()
    np.testing.assert_array_equal(knn_predict(restored, test), knn_predict(model, test))

    with pytest.raises(ValueError, match="not in dataset"):
        KnnModel.from_dict(model.to_dict(), data.take(range(10)))


def test_knn_validation():
    train = matrix([0.0, 1.0], [-1, 1])
    with pytest.raises(ValueError, match="k must be"):
        KnnModel(train, k=3)
    with pytest.raises(ValueError, match="Unknown metric"):
        KnnModel(train, k=1, metric="cosine")


def test_impurity_values():
    assert impurity(2, 4, "gini") == pytest.approx(0.5)
    assert impurity(2, 4, "entropy") == pytest.approx(1.0)
    assert impurity(4, 4, "gini") == pytest.approx(0.0)
    assert impurity(0, 4, "entropy") == pytest.approx(0.0)


def test_tree_single_threshold():
    train = matrix([1.0, 2.0, 3.0, 10.0, 11.0, 12.0], [-1, -1, -1, 1, 1, 1])
    model = tree_fit(train)
    assert model.depth() == 1
    assert model.root.feature == 0
    assert model.root.threshold == pytest.approx(6.5)
    np.testing.assert_array_equal(tree_predict(model, matrix([6.5, 6.6], [1, 1])), [-1, 1])


def test_tree_midpoint_threshold():
    train = matrix([0.0, 1.0, 2.0, 3.0], [-1, -1, 1, 1])
    model = tree_fit(train, "gini")
    assert model.root.threshold == pytest.approx(1.5)
    assert model.depth() == 1
    assert TreeClassifier().fit(train).score(train) == 100.0
    np.testing.assert_array_equal(tree_predict(model, matrix([0.7, 1.5, 2.9], [-1, -1, 1])), [-1, -1, 1])


def test_tree_training_accuracy_falls_with_min_samples_leaf():
    train = matrix(np.arange(10.0), [-1, -1, -1, -1, 1, -1, 1, 1, 1, 1])
    scores = [TreeClassifier(min_samples_leaf=m).fit(train).score(train) for m in (1, 2, 3, 5, 10)]
    assert scores == sorted(scores, reverse=True)
    assert scores[0] == 100.0
    assert scores[-1] == 50.0


def test_tree_model_serialization():
    rng = np.random.default_rng(16)
    X = rng.normal(size=(40, 3))
    train = matrix(X, np.where(X[:, 0] * X[:, 2] > 0, 1, -1))
    model = tree_fit(train, "entropy", limits=TreeLimits(max_depth=4, min_samples_leaf=2))
    restored = TreeModel.from_dict(model.to_dict())
    assert restored.to_dict() == model.to_dict()
    assert restored.limits == model.limits
    queries = matrix(rng.normal(size=(25, 3)), np.ones(25, dtype=int), row_ids=np.arange(100, 125))
    np.testing.assert_array_equal(tree_predict(restored, queries), tree_predict(model, queries))


def test_tree_depth_zero_is_majority_leaf():
    train = matrix([1.0, 2.0, 3.0, 4.0], [-1, 1, -1, 1])
    model = tree_fit(train, limits=TreeLimits(max_depth=0))
    assert model.n_leaves() == 1
    assert model.root.label == 1


def test_tree_respects_min_samples_leaf():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(40, 3))
    train = matrix(X, np.where(X[:, 0] > 0, 1, -1))
    model = tree_fit(train, "entropy", limits=TreeLimits(min_samples_leaf=5))

    def leaves(node):
        return [node] if node.is_leaf else leaves(node.left) + leaves(node.right)
    assert all(leaf.n_samples >= 5 for leaf in leaves(model.root))


def test_random_splitter_is_seeded_and_fits_training_data():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(30, 4))
    train = matrix(X, np.where(X[:, 1] * X[:, 2] > 0, 1, -1))
    first = TreeClassifier(splitter="random", seed=3).fit(train)
    second = TreeClassifier(splitter="random", seed=3).fit(train)
    assert first.model.to_dict() == second.model.to_dict()
    assert first.score(train) == 100.0


def test_tree_rejects_narrow_queries():
    train = matrix(np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]), [-1, 1, 1])
    model = tree_fit(train)
    with pytest.raises(ValueError, match="out of range"):
        tree_predict(model, matrix([0.5], [1]))


def test_tree_rejects_unknown_criterion():
    with pytest.raises(ValueError, match="Unknown criterion"):
        tree_fit(matrix([0.0, 1.0], [-1, 1]), criterion="mse")
