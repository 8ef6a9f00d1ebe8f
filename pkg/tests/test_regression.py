import numpy as np
import pytest

from metaseg.errors import DimensionMismatch, EmptyDataset, SeparableDivergence
from metaseg.regression import (
    Standardizer,
    default_grid,
    fit_lasso_logistic,
    fit_linear,
    kkt_violation,
    lambda_max,
    lasso_path,
    load_model,
    logistic_objective,
    refit_unpenalized,
    save_model,
)
from oracles import kkt_oracle, logistic_reference


def _problem(seed, n=60, p=5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    logits = X @ rng.normal(size=p) + rng.normal(scale=2.0, size=n)
    y = (logits > 0).astype(np.float64)
    if y.sum() in (0, n):  # keep both classes
        y[0] = 1.0 - y[0]
    return X, y


# -- standardizer -----------------------------------------------------------


def test_standardizer_two_point_column():
    # sample (n-1) convention: std of [1, 3] is sqrt(2), not 1
    s = Standardizer.fit(np.array([[1.0], [3.0]]))
    assert s.means[0] == 2.0 and s.stds[0] == pytest.approx(np.sqrt(2))
    np.testing.assert_allclose(
        s.transform(np.array([[1.0], [3.0]])).ravel(), [-1 / np.sqrt(2), 1 / np.sqrt(2)]
    )


def test_standardizer_constant_column_maps_to_zero():
    s = Standardizer.fit(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]))
    out = s.transform(np.array([[5.0, 2.0]]))
    assert out[0, 0] == 0.0


def test_standardizer_centers_training_matrix():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 6)) * 7 + 3
    out = Standardizer.fit(X).transform(X)
    assert np.abs(out.mean(axis=0)).max() < 1e-10
    np.testing.assert_allclose(out.std(axis=0, ddof=1), 1.0, atol=1e-10)


def test_standardizer_input_validation():
    with pytest.raises(EmptyDataset):
        Standardizer.fit(np.ones((1, 3)))
    s = Standardizer.fit(np.ones((4, 3)) * np.arange(4)[:, None])
    with pytest.raises(DimensionMismatch):
        s.transform(np.ones((2, 5)))


# -- penalized fits ---------------------------------------------------------


def test_lambda_max_gives_exact_null_model():
    X, y = _problem(1)
    lm = lambda_max(X, y)
    for lam in (lm, lm * 1.5, lm * 10):
        m = fit_lasso_logistic(X, y, lam)
        assert np.all(m.weights == 0.0)
        assert m.intercept == pytest.approx(np.log(y.mean() / (1 - y.mean())))
    m = fit_lasso_logistic(X, y, lm * 0.99)
    assert kkt_oracle(X, y, m.weights, m.intercept, lm * 0.99) < 1e-6


def test_symmetric_problem_stays_at_zero():
    X = np.array([[-1.0], [-1.0], [1.0], [1.0]])
    y = np.array([0.0, 1.0, 0.0, 1.0])
    for lam in (0.1, 0.0):
        m = fit_lasso_logistic(X, y, lam)
        assert abs(m.weights[0]) < 1e-8
        assert abs(m.intercept) < 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_kkt_certificate_random_problems(seed):
    X, y = _problem(100 + seed)
    lm = lambda_max(X, y)
    for lam in (lm * 0.5, lm * 0.1, lm * 0.01, 0.0):
        m = fit_lasso_logistic(X, y, lam)
        assert kkt_oracle(X, y, m.weights, m.intercept, lam) < 1e-6


def test_objective_matches_slow_reference_penalized():
    X, y = _problem(7, n=50, p=4)
    for lam in (0.05, 0.01):
        m = fit_lasso_logistic(X, y, lam)
        ours = logistic_objective(X, y, m.weights, m.intercept, lam)
        ref = logistic_reference(X, y, lam)
        assert ours == pytest.approx(ref, abs=1e-6)


def test_unpenalized_matches_slow_reference():
    X, y = _problem(8, n=80, p=6)
    m = fit_lasso_logistic(X, y, 0.0)
    ours = logistic_objective(X, y, m.weights, m.intercept, 0.0)
    assert ours == pytest.approx(logistic_reference(X, y, 0.0), abs=1e-6)


def test_separable_data_raises_at_lambda_zero():
    # tiny feature scale forces huge weights before the gradient vanishes
    X = np.array([[-0.001], [-0.002], [0.001], [0.002]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    with pytest.raises(SeparableDivergence):
        fit_lasso_logistic(X, y, 0.0)


def test_duplicate_and_collinear_columns_still_converge():
    # exactly duplicated and affinely dependent columns mirror the metric
    # table (S_rel differs from S_in_rel by a constant)
    X, y = _problem(9, n=100, p=3)
    X = np.hstack([X, X[:, :1], X[:, :1] + X[:, 1:2]])
    for lam in (0.01, 1e-4, 0.0):
        m = fit_lasso_logistic(X, y, lam)
        assert kkt_oracle(X, y, m.weights, m.intercept, lam) < 1e-6


# -- path -------------------------------------------------------------------


def test_singleton_grid_is_null_model():
    X, y = _problem(2)
    lm = lambda_max(X, y)
    path = lasso_path(X, y, np.array([lm]))
    assert np.all(path.models[0].weights == 0.0)


def test_default_grid_shape():
    g = default_grid(1.0, 10, 1e-2)
    assert len(g) == 11 and g[0] == 1.0 and g[-1] == 0.0
    assert np.all(np.diff(g) < 0)


def test_grid_must_decrease():
    X, y = _problem(3)
    with pytest.raises(ValueError):
        lasso_path(X, y, np.array([0.1, 0.2]))


def test_informative_feature_enters_first():
    rng = np.random.default_rng(12)
    n = 300
    signal = rng.normal(size=n)
    X = np.column_stack([signal, rng.normal(size=(n, 3)) @ np.eye(3)])
    X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    y = (signal + 0.3 * rng.normal(size=n) > 0).astype(float)
    grid = default_grid(lambda_max(X, y), 25)
    path = lasso_path(X, y, grid)
    for m in path.models:
        if len(m.active_set):
            assert m.active_set.tolist() == [0]
            break
    else:
        pytest.fail("no model on the path activated any feature")


def test_path_is_deterministic():
    X, y = _problem(4)
    grid = default_grid(lambda_max(X, y), 15)
    p1 = lasso_path(X, y, grid)
    p2 = lasso_path(X, y, grid)
    for a, b in zip(p1.models, p2.models):
        np.testing.assert_array_equal(a.weights, b.weights)
        assert a.intercept == b.intercept


def test_select_best_prefers_largest_lambda_on_ties():
    X, y = _problem(5)
    Xv, yv = _problem(6)
    grid = default_grid(lambda_max(X, y), 10)
    path = lasso_path(X, y, grid, Xv, yv)
    best = path.select_best()
    vals = path.metrics[("validation", "acc")]
    assert vals[best] == vals.max()
    assert np.all(vals[:best] < vals[best])


# -- refit / linear ---------------------------------------------------------


def test_refit_all_columns_equals_plain_fit():
    X, y = _problem(13)
    full = fit_lasso_logistic(X, y, 0.0)
    refit = refit_unpenalized(X, y, np.arange(X.shape[1]))
    o1 = logistic_objective(X, y, full.weights, full.intercept, 0.0)
    o2 = logistic_objective(X, y, refit.weights, refit.intercept, 0.0)
    assert o1 == pytest.approx(o2, abs=1e-9)


def test_refit_empty_active_set_is_intercept_only():
    X, y = _problem(14)
    m = refit_unpenalized(X, y, np.array([], dtype=np.int64))
    assert np.all(m.weights == 0.0)
    assert m.intercept == pytest.approx(np.log(y.mean() / (1 - y.mean())))


def test_refit_dominates_penalized_solution():
    X, y = _problem(15)
    lam = lambda_max(X, y) * 0.05
    pen = fit_lasso_logistic(X, y, lam)
    refit = refit_unpenalized(X, y, pen.active_set)
    o_pen = logistic_objective(X, y, pen.weights, pen.intercept, 0.0)
    o_ref = logistic_objective(X, y, refit.weights, refit.intercept, 0.0)
    assert o_ref <= o_pen + 1e-12


def test_linear_fit_line():
    X = np.array([[0.0], [1.0], [2.0]])
    m = fit_linear(X, np.array([0.0, 1.0, 2.0]))
    assert m.weights[0] == pytest.approx(1.0, abs=1e-6)
    assert m.intercept == pytest.approx(0.0, abs=1e-6)


def test_linear_fit_constant_target():
    rng = np.random.default_rng(16)
    X = rng.normal(size=(30, 4))
    m = fit_linear(X, np.full(30, 3.5))
    assert np.abs(m.weights).max() < 1e-6
    assert m.intercept == pytest.approx(3.5, abs=1e-6)


def test_linear_residual_orthogonality():
    rng = np.random.default_rng(17)
    X = rng.normal(size=(50, 6))
    y = rng.normal(size=50)
    m = fit_linear(X, y)
    r = y - (m.intercept + X @ m.weights)
    assert np.abs(X.T @ r).max() < 1e-8
    assert abs(r.sum()) < 1e-8


# -- pipeline properties ----------------------------------------------------


def test_rescaling_invariance_through_standardization():
    rng = np.random.default_rng(18)
    X_raw = rng.normal(size=(120, 5)) * [1, 10, 0.1, 3, 1] + 2
    y = (X_raw[:, 0] - X_raw[:, 2] * 10 + rng.normal(scale=2, size=120) > 0).astype(float)

    def scores(Xr):
        std = Standardizer.fit(Xr)
        m = fit_lasso_logistic(std.transform(Xr), y, 0.01, standardizer=std)
        return m.scores(Xr)

    X_scaled = X_raw.copy()
    X_scaled[:, 1] *= 1000.0
    np.testing.assert_allclose(scores(X_raw), scores(X_scaled), atol=1e-6)


def test_model_save_load_roundtrip(tmp_path):
    X, y = _problem(19)
    std = Standardizer.fit(X)
    m = fit_lasso_logistic(std.transform(X), y, 0.02, standardizer=std)
    save_model(m, tmp_path / "model.json")
    m2 = load_model(tmp_path / "model.json")
    assert m2.kind == m.kind and m2.lam == m.lam
    np.testing.assert_array_equal(m.weights, m2.weights)
    np.testing.assert_allclose(m.scores(X), m2.scores(X), atol=1e-15)


def test_kkt_violation_matches_oracle():
    X, y = _problem(20)
    rng = np.random.default_rng(20)
    w = rng.normal(size=X.shape[1]) * [1, 0, 1, 0, 1]
    assert kkt_violation(X, y, w, 0.3, 0.05) == pytest.approx(
        kkt_oracle(X, y, w, 0.3, 0.05), abs=1e-12
    )
