import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from supportsel import learners
from supportsel.learners import (DegenerateModelError, SpecError, decision_value,
                                 fit, knn_spec, lr_spec, model_from_dict, predict,
                                 predict_many, rbf_kernel, rf_spec, svm_spec)
from supportsel.learners.logreg import LogRegState, loss_and_grad
from supportsel.learners.svm import _gram, kkt_report


def planted_xy(rng, n=150, d=12, noise=0.0):
    X = rng.integers(0, 6, size=(n, d)).astype(float)
    w = np.zeros(d)
    w[:3] = [2.0, 1.0, 3.0]
    z = X @ w
    y = (z > np.median(z)).astype(np.int8)
    if noise:
        flips = rng.random(n) < noise
        y = np.where(flips, 1 - y, y).astype(np.int8)
    return X, y


# -- spec validation ----------------------------------------------------------

def test_spec_validation():
    with pytest.raises(SpecError):
        knn_spec(4)  # even
    with pytest.raises(SpecError):
        knn_spec(0)
    with pytest.raises(SpecError):
        rf_spec(0)
    with pytest.raises(SpecError):
        svm_spec("poly")
    with pytest.raises(SpecError):
        svm_spec("rbf", c=0.0)
    with pytest.raises(SpecError):
        svm_spec("rbf", gamma=-1.0)
    with pytest.raises(SpecError):
        lr_spec(l2_strength=-0.5)


def test_display_names():
    assert rf_spec(50).display_name() == "RF, 50 estimators"
    assert knn_spec(7).display_name() == "KNN K=7"
    assert svm_spec("linear").display_name() == "SVM Linear"
    assert svm_spec("rbf").display_name() == "SVM RBF"
    assert lr_spec().display_name() == "LR"


# -- shared fit/predict contract ----------------------------------------------

ALL_SPECS = [rf_spec(10), knn_spec(3), svm_spec("linear"), svm_spec("rbf"), lr_spec()]


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.key())
def test_single_class_labels_give_constant_model(spec, rng):
    X = rng.normal(size=(10, 4))
    model = fit(spec, X, np.ones(10, dtype=int), seed=3)
    assert model.degenerate
    assert predict_many(model, X).tolist() == [1] * 10
    with pytest.raises(DegenerateModelError):
        decision_value(model, X[0])


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.key())
def test_non_finite_inputs_fatal(spec, rng):
    X = rng.normal(size=(8, 3))
    X[2, 1] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        fit(spec, X, np.array([0, 1] * 4), seed=0)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.key())
def test_dimension_mismatch_rejected(spec, rng):
    X, y = planted_xy(rng, n=40, d=5)
    model = fit(spec, X, y, seed=0)
    with pytest.raises(ValueError, match="features"):
        predict(model, np.zeros(4))


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.key())
def test_fit_deterministic_per_seed(spec, rng):
    X, y = planted_xy(rng, n=80, noise=0.05)
    probe = rng.integers(0, 6, size=(30, 12)).astype(float)
    m1 = fit(spec, X, y, seed=99)
    m2 = fit(spec, X, y, seed=99)
    assert m1.fingerprint() == m2.fingerprint()
    assert np.array_equal(predict_many(m1, probe), predict_many(m2, probe))


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.key())
def test_serialization_round_trip(spec, rng):
    X, y = planted_xy(rng, n=60, noise=0.05)
    probe = rng.integers(0, 6, size=(20, 12)).astype(float)
    model = fit(spec, X, y, seed=42)
    payload = json.loads(json.dumps(model.to_dict()))
    again = model_from_dict(payload)
    assert again.fingerprint() == model.fingerprint()
    assert np.array_equal(predict_many(again, probe), predict_many(model, probe))


@pytest.mark.parametrize("spec", [knn_spec(3), svm_spec("linear"), lr_spec()],
                         ids=lambda s: s.key())
def test_binary_inputs_skip_standardization(spec, rng):
    X = rng.integers(0, 2, size=(40, 6)).astype(float)
    y = (X[:, 0] + X[:, 1] > 0).astype(np.int8)
    model = fit(spec, X, y, seed=0)
    assert model.scale_mean is None


def test_numeric_inputs_are_standardized(rng):
    X, y = planted_xy(rng, n=50)
    model = fit(lr_spec(), X, y, seed=0)
    assert model.scale_mean is not None
    assert np.allclose(model.scale_mean, X.mean(axis=0))


def test_rf_consumes_raw_values(rng):
    X, y = planted_xy(rng, n=50)
    model = fit(rf_spec(5), X, y, seed=0)
    assert model.scale_mean is None


def test_tiny_training_set_rejected(rng):
    with pytest.raises(ValueError, match="at least 2"):
        fit(lr_spec(), np.zeros((1, 3)), np.array([1]), seed=0)


# -- KNN vs brute-force oracle --------------------------------------------------

def knn_oracle(X, y, query, k):
    """Exhaustive distance sort with the documented tie rules, written first."""
    scored = []
    for index, row in enumerate(X):
        d2 = sum((a - b) * (a - b) for a, b in zip(row, query))
        scored.append((d2, index))
    scored.sort()
    votes = [int(y[index]) for _, index in scored[:k]]
    ones = sum(votes)
    if 2 * ones > k:
        return 1
    return 0  # strict majority required; equal split is label 0


@pytest.mark.parametrize("k", [1, 5, 11])
def test_knn_matches_brute_force_oracle(k, rng):
    X, y = planted_xy(rng, n=50, noise=0.1)
    model = fit(knn_spec(k), X, y, seed=0)
    queries = rng.integers(0, 6, size=(200, 12)).astype(float)
    scaled_train = model.state.X
    scaled_queries = model._scale(queries)
    got = predict_many(model, queries)
    want = [knn_oracle(scaled_train, model.state.y, q, k) for q in scaled_queries]
    assert got.tolist() == want


def test_knn_k1_returns_training_label(rng):
    X = np.array([[0.0, 0.0], [3.0, 1.0], [5.0, 4.0], [1.0, 5.0]])
    y = np.array([1, 0, 1, 0])
    model = fit(knn_spec(1), X, y, seed=0)
    for row, label in zip(X, y):
        assert predict(model, row) == label


def test_knn_equal_distance_admits_lower_index(rng):
    # binary inputs keep scaling identity, so the engineered tie survives:
    # query (0,0) is at squared distance 1 from both index 0 and index 1
    X = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([1, 0, 0])
    model = fit(knn_spec(1), X, y, seed=0)
    assert predict(model, np.array([0.0, 0.0])) == 1  # index 0 admitted first


def test_knn_k_larger_than_training_set(rng):
    X, y = planted_xy(rng, n=6, d=3)
    with pytest.raises(ValueError, match="exceeds"):
        fit(knn_spec(7), X, y, seed=0)


# -- logistic regression ---------------------------------------------------------

def finite_difference_grad(w, b, X, y, l2, h=1e-6):
    grad_w = np.zeros_like(w)
    for i in range(w.size):
        bump = np.zeros_like(w)
        bump[i] = h
        up, _, _ = loss_and_grad(w + bump, b, X, y, l2)
        down, _, _ = loss_and_grad(w - bump, b, X, y, l2)
        grad_w[i] = (up - down) / (2 * h)
    up, _, _ = loss_and_grad(w, b + h, X, y, l2)
    down, _, _ = loss_and_grad(w, b - h, X, y, l2)
    return grad_w, (up - down) / (2 * h)


def test_lr_gradient_matches_central_differences(rng):
    X = rng.normal(size=(40, 6))
    y = (rng.random(40) > 0.5).astype(float)
    for _ in range(20):
        w = rng.normal(scale=2.0, size=6)
        b = float(rng.normal(scale=2.0))
        _, gw, gb = loss_and_grad(w, b, X, y, 1.0)
        fw, fb = finite_difference_grad(w, b, X, y, 1.0)
        analytic = np.append(gw, gb)
        numeric = np.append(fw, fb)
        rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
        assert rel < 1e-4


def test_lr_loss_non_increasing_and_terminates(rng):
    X, y = planted_xy(rng, n=100, noise=0.05)
    model = fit(lr_spec(max_iterations=500), X, y, seed=0)
    state = model.state
    assert state.n_iterations <= 500
    # re-run the descent manually and check monotonicity of accepted losses
    Xs = model._scale(X)
    losses = []
    w = np.zeros(Xs.shape[1])
    b = 0.0
    loss, gw, gb = loss_and_grad(w, b, Xs, y.astype(float), 1.0)
    losses.append(loss)
    step = 1.0
    for _ in range(50):
        g_sq = float(gw @ gw + gb * gb)
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            loss_new, gw_new, gb_new = loss_and_grad(w_new, b_new, Xs, y.astype(float), 1.0)
            if loss_new <= loss - 1e-4 * step * g_sq or step < 1e-16:
                break
            step *= 0.5
        w, b, loss, gw, gb = w_new, b_new, loss_new, gw_new, gb_new
        losses.append(loss)
        step = min(step * 2, 1e6)
    assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))


def test_lr_zero_model_probability_half_is_label_zero():
    model = learners.TrainedModel(
        spec=lr_spec(), n_features=3, scale_mean=None, scale_std=None,
        degenerate=False, constant_label=None,
        state=LogRegState(weights=np.zeros(3), intercept=0.0, n_iterations=0,
                          converged=True, grad_norm=0.0),
    )
    assert decision_value(model, np.zeros(3)) == pytest.approx(0.5)
    assert predict(model, np.zeros(3)) == 0


def test_lr_decision_at_feature_means_is_logistic_intercept(rng):
    X, y = planted_xy(rng, n=120, noise=0.1)
    model = fit(lr_spec(), X, y, seed=0)
    at_means = decision_value(model, X.mean(axis=0))
    expected = 1.0 / (1.0 + math.exp(-model.state.intercept))
    assert at_means == pytest.approx(expected, abs=1e-12)


# -- SVM ------------------------------------------------------------------------

def separable_fixture():
    """Two well-separated 2-D clusters, wide margin."""
    rng = np.random.default_rng(7)
    a = rng.normal(loc=(-3.0, -3.0), scale=0.4, size=(20, 2))
    b = rng.normal(loc=(3.0, 3.0), scale=0.4, size=(20, 2))
    X = np.vstack([a, b])
    y = np.array([0] * 20 + [1] * 20, dtype=np.int8)
    return X, y


def test_svm_separable_reaches_training_ccr_one():
    X, y = separable_fixture()
    model = fit(svm_spec("linear"), X, y, seed=0)
    assert (predict_many(model, X) == y).all()


def test_svm_kkt_conditions_within_tolerance():
    X, y = separable_fixture()
    for kernel in ("linear", "rbf"):
        model = fit(svm_spec(kernel), X, y, seed=0)
        report = kkt_report(model.state, model._scale(X), y)
        assert report["max_violation"] <= 1e-3
        assert report["equality"] <= 1e-9


def test_svm_dual_box_constraints(rng):
    X, y = planted_xy(rng, n=80, noise=0.1)
    model = fit(svm_spec("rbf", c=1.0), X, y, seed=0)
    alpha = model.state.sv_alpha
    assert (alpha >= -1e-12).all()
    assert (alpha <= 1.0 + 1e-12).all()


def test_svm_free_support_vector_sits_on_margin():
    X, y = separable_fixture()
    model = fit(svm_spec("linear"), X, y, seed=0)
    state = model.state
    free = (state.sv_alpha > 1e-8) & (state.sv_alpha < state.c - 1e-8)
    assert free.any()
    margins = state.sv_y[free] * (
        _gram(state.sv_X[free], state.sv_X, "linear", state.gamma) @ state.sv_coef
        + state.bias
    )
    assert np.abs(np.abs(margins) - 1.0).max() <= 1.5e-3


def dual_objective(alpha, K, y):
    Q = K * np.outer(y, y)
    return alpha.sum() - 0.5 * alpha @ Q @ alpha


def test_svm_dual_matches_qp_oracle(rng):
    cvxopt = pytest.importorskip("cvxopt")
    from cvxopt import matrix, solvers
    solvers.options["show_progress"] = False

    X, y01 = planted_xy(rng, n=40, d=4, noise=0.1)
    for kernel in ("linear", "rbf"):
        model = fit(svm_spec(kernel, c=1.0), X, y01, seed=0)
        state = model.state
        Xs = model._scale(X)
        y = np.where(y01 > 0, 1.0, -1.0)
        K = _gram(Xs, Xs, kernel, state.gamma)
        n = len(y)

        Q = K * np.outer(y, y)
        P = matrix(Q + 1e-10 * np.eye(n))
        q = matrix(-np.ones(n))
        G = matrix(np.vstack([-np.eye(n), np.eye(n)]))
        h = matrix(np.hstack([np.zeros(n), np.ones(n)]))
        A = matrix(y[None, :])
        b = matrix(np.zeros(1))
        solution = solvers.qp(P, q, G, h, A, b)
        alpha_qp = np.asarray(solution["x"]).ravel()

        alpha_smo = np.zeros(n)
        alpha_smo[state.sv_index] = state.sv_alpha
        obj_smo = dual_objective(alpha_smo, K, y)
        obj_qp = dual_objective(alpha_qp, K, y)
        assert obj_smo == pytest.approx(obj_qp, rel=1e-3, abs=1e-3)


def test_rbf_kernel_hand_values():
    assert rbf_kernel(np.array([1.0, 2.0]), np.array([1.0, 2.0]), 0.7) == pytest.approx(1.0)
    got = rbf_kernel(np.array([0.0, 0.0]), np.array([1.0, 1.0]), 0.5)
    assert got == pytest.approx(math.exp(-1.0), abs=1e-12)
    tiny = rbf_kernel(np.array([0.0, 0.0]), np.array([4.0, 4.0]), 1e-12)
    assert tiny == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        rbf_kernel(np.zeros(2), np.ones(2), 0.0)


@settings(max_examples=50, deadline=None)
@given(
    data=st.lists(
        st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3),
        min_size=2, max_size=20,
    ),
    gamma=st.floats(0.01, 3.0),
)
def test_rbf_gram_symmetric_positive_semidefinite(data, gamma):
    A = np.asarray(data)
    gram = _gram(A, A, "rbf", gamma)
    assert np.allclose(gram, gram.T)
    eigenvalues = np.linalg.eigvalsh(gram)
    assert eigenvalues.min() >= -1e-8


# -- random forest ----------------------------------------------------------------

def test_rf_unlimited_depth_memorizes_consistent_labels(rng):
    X = rng.normal(size=(60, 5))  # continuous features: rows unique
    y = (rng.random(60) > 0.5).astype(np.int8)
    model = fit(rf_spec(15), X, y, seed=4)
    assert (predict_many(model, X) == y).all()


def test_rf_memorizes_even_with_label_noise(rng):
    X = rng.normal(size=(80, 4))
    y = (rng.random(80) > 0.5).astype(np.int8)
    model = fit(rf_spec(25), X, y, seed=1)
    assert (predict_many(model, X) == y).mean() == 1.0


def test_rf_training_beats_heldout(planted_noisy):
    from supportsel.survey import binarize
    dataset, manifest = planted_noisy
    view = binarize(dataset, 1, False)
    target = dataset.active_targets[0]
    y = view.y[target]
    X = view.X
    model = fit(rf_spec(50), X[:150], y[:150], seed=0)
    train_acc = (predict_many(model, X[:150]) == y[:150]).mean()
    held_acc = (predict_many(model, X[150:]) == y[150:]).mean()
    assert train_acc >= held_acc


def test_rf_depth_limit_is_honored(rng):
    X, y = planted_xy(rng, n=100, noise=0.2)
    model = fit(rf_spec(5, max_depth=2), X, y, seed=0)
    for tree in model.state.trees:
        # depth-2 tree has at most 7 nodes
        assert len(tree.feature) <= 7


def test_rf_seed_changes_forest(rng):
    X, y = planted_xy(rng, n=80, noise=0.1)
    m1 = fit(rf_spec(10), X, y, seed=1)
    m2 = fit(rf_spec(10), X, y, seed=2)
    assert m1.fingerprint() != m2.fingerprint()


def test_rf_spec_seed_overrides_fit_seed(rng):
    X, y = planted_xy(rng, n=60, noise=0.1)
    m1 = fit(rf_spec(5, seed=77), X, y, seed=1)
    m2 = fit(rf_spec(5, seed=77), X, y, seed=2)
    assert m1.fingerprint() == m2.fingerprint()


def test_rf_all_trees_agree_vote_fraction_is_zero_or_one(rng):
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] > 0).astype(np.int8)  # trivially learnable
    model = fit(rf_spec(20), X, y, seed=0)
    probe = np.array([[3.0, 0.0, 0.0], [-3.0, 0.0, 0.0]])
    values = [decision_value(model, row) for row in probe]
    assert values[0] == 1.0 and values[1] == 0.0


def test_xor_is_memorized(rng):
    # zero-gain first split must still be taken
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 3)
    y = np.array([0, 1, 1, 0] * 3, dtype=np.int8)
    model = fit(rf_spec(30), X, y, seed=0)
    assert (predict_many(model, X) == y).all()
