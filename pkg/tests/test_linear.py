import numpy as np
import pandas as pd
import pytest

from spellforge.errors import ConfigError, DataError, MissingColumnError
from spellforge.learners.base import predict
from spellforge.learners.lasso import lambda_max, lasso_fit, lasso_path, post_lasso_ols, soft_threshold
from spellforge.learners.linear import least_squares, ols_fit


class TestOls:
    def test_recovers_coefficients(self, linear_design):
        X, y, beta = linear_design
        model = ols_fit(X, y)
        np.testing.assert_allclose(model.coefficient_vector(), beta, atol=0.05)
        assert model.intercept == pytest.approx(0.5, abs=0.05)
        assert model.feature_names == ["x1", "x2", "x3", "x4", "x5"]

    def test_collinear_column_is_dropped(self, linear_design):
        X, y, _ = linear_design
        doubled = np.column_stack([X, 2.0 * X[:, 0]])
        model = ols_fit(doubled, y)
        assert len(model.dropped) == 1
        full = ols_fit(X, y)
        np.testing.assert_allclose(predict(model, doubled), predict(full, X), atol=1e-8)

    def test_no_columns_fits_the_mean(self):
        y = np.array([1.0, 2.0, 6.0])
        intercept, beta, dropped = least_squares(np.zeros((3, 0)), y)
        assert intercept == pytest.approx(3.0)
        assert beta.size == 0 and dropped == []

    def test_constant_column(self):
        X = np.column_stack([np.ones(4), [1.0, 2.0, 3.0, 4.0]])
        model = ols_fit(X, [2.0, 4.0, 6.0, 8.0])
        assert model.dropped == ["x1"]
        assert model.coefficients["x2"] == pytest.approx(2.0)
        assert model.intercept == pytest.approx(0.0, abs=1e-10)

    def test_predict_aligns_columns_by_name(self, linear_design):
        X, y, _ = linear_design
        frame = pd.DataFrame(X, columns=["a", "b", "c", "d", "e"])
        model = ols_fit(frame, y)
        shuffled = frame[["e", "d", "c", "b", "a"]]
        np.testing.assert_allclose(predict(model, shuffled), predict(model, frame))
        with pytest.raises(MissingColumnError):
            predict(model, frame.drop(columns=["b"]))

    def test_row_mismatch(self):
        with pytest.raises(DataError):
            ols_fit(np.zeros((3, 1)), [1.0, 2.0])


class TestLasso:
    def test_lambda_max_zeroes_every_coefficient(self, linear_design):
        X, y, _ = linear_design
        top = lambda_max(X, y)
        assert lasso_fit(X, y, 1.0001 * top).support == []
        assert lasso_fit(X, y, 0.9 * top).support != []

    def test_empty_support_predicts_the_mean(self, linear_design):
        X, y, _ = linear_design
        model = lasso_fit(X, y, 10 * lambda_max(X, y))
        np.testing.assert_allclose(predict(model, X), y.mean())

    def test_objective_never_increases(self, linear_design):
        X, y, _ = linear_design
        trace = np.array(lasso_fit(X, y, 0.05 * lambda_max(X, y)).objective_trace)
        assert np.all(np.diff(trace) <= 1e-9 * trace[0])

    def test_optimality_conditions(self, linear_design):
        X, y, _ = linear_design
        lam = 0.1 * lambda_max(X, y)
        model = lasso_fit(X, y, lam)
        Z = (X - X.mean(axis=0)) / X.std(axis=0)
        gradient = 2.0 * Z.T @ (y - y.mean() - Z @ model.standardized)
        active = model.standardized != 0.0
        np.testing.assert_allclose(gradient[active], lam * np.sign(model.standardized[active]), rtol=1e-3)
        assert np.all(np.abs(gradient[~active]) <= lam * (1 + 1e-3))

    def test_sparse_truth_is_selected(self, linear_design):
        X, y, _ = linear_design
        model = lasso_fit(X, y, 0.05 * lambda_max(X, y))
        assert {"x1", "x2"} <= set(model.support)
        assert model.coefficients["x1"] > 0 > model.coefficients["x2"]

    def test_zero_penalty_matches_ols(self, linear_design):
        X, y, _ = linear_design
        np.testing.assert_allclose(lasso_fit(X, y, 0.0).beta, ols_fit(X, y).coefficient_vector(), atol=1e-4)

    def test_constant_column_stays_at_zero(self, linear_design):
        X, y, _ = linear_design
        padded = np.column_stack([np.full(len(y), 3.0), X])
        model = lasso_fit(padded, y, 0.01 * lambda_max(padded, y))
        assert model.beta[0] == 0.0

    def test_path_matches_single_fits(self, linear_design):
        X, y, _ = linear_design
        top = lambda_max(X, y)
        lambdas = [0.01 * top, 0.5 * top, 0.1 * top]
        path = lasso_path(X, y, lambdas)
        assert [m.lam for m in path] == lambdas
        for lam, fitted in zip(lambdas, path):
            np.testing.assert_allclose(fitted.beta, lasso_fit(X, y, lam).beta, atol=1e-4)

    def test_post_lasso_refits_on_the_support(self, linear_design):
        X, y, beta = linear_design
        model = lasso_fit(X, y, 0.2 * lambda_max(X, y))
        refit = post_lasso_ols(model, X, y)
        assert refit.feature_names == model.support
        assert model.post_lasso is refit
        assert refit.coefficients["x1"] == pytest.approx(beta[0], abs=0.05)
        assert refit.coefficients["x2"] == pytest.approx(beta[1], abs=0.05)

    def test_negative_lambda(self, linear_design):
        X, y, _ = linear_design
        with pytest.raises(ConfigError):
            lasso_fit(X, y, -1.0)
        with pytest.raises(ConfigError):
            lasso_path(X, y, [1.0, -1.0])


def orthogonal_design(rng, n, k):
    """Centered columns with unit population variance and zero cross products."""
    M = rng.normal(size=(n, k))
    Q, _ = np.linalg.qr(M - M.mean(axis=0))
    return Q * np.sqrt(n)


class TestLassoOracles:
    @pytest.mark.parametrize("fraction", [0.0, 0.1, 0.4, 0.8])
    def test_orthogonal_design_is_soft_thresholding(self, rng, fraction):
        n = 60
        X = orthogonal_design(rng, n, 4)
        y = X @ np.array([1.0, -0.5, 0.2, 0.0]) + rng.normal(size=n)
        lam = fraction * lambda_max(X, y)
        expected = [soft_threshold(float(z @ (y - y.mean())), lam / 2.0) / n for z in X.T]
        model = lasso_fit(X, y, lam)
        np.testing.assert_allclose(model.standardized, expected, atol=1e-6)
        if lam == 0.0:
            np.testing.assert_allclose(model.beta, ols_fit(X, y).coefficient_vector(), atol=1e-6)

    def test_objective_trace_is_monotone_on_random_designs(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n, k = int(rng.integers(20, 51)), int(rng.integers(1, 6))
            X = rng.normal(size=(n, k))
            y = X @ rng.normal(size=k) + rng.normal(size=n)
            lam = float(rng.uniform(0.01, 0.9)) * lambda_max(X, y)
            trace = np.array(lasso_fit(X, y, lam).objective_trace)
            assert np.all(np.diff(trace) <= 1e-9 * trace[0]), seed

    @pytest.mark.parametrize("factor", [1.0 + 1e-9, 2.0])
    def test_lambda_at_or_above_the_maximum_selects_nothing(self, factor):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(30, 4))
            y = X[:, 0] + rng.normal(size=30)
            model = lasso_fit(X, y, factor * lambda_max(X, y))
            assert model.support == []
            np.testing.assert_array_equal(model.standardized, 0.0)
