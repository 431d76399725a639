import numpy as np
import pytest

from spellforge.dependencies import derive_seed, resolve_threads
from spellforge.errors import ConfigError, DataError, NumericalError
from spellforge.learners.base import predict
from spellforge.learners.boosting import gbt_fit
from spellforge.learners.linear import ols_fit
from spellforge.models import GridSpec, ParamGrid
from spellforge.selection.cv import cross_validate, select_cell
from spellforge.selection.learners import get_learner
from spellforge.selection import metrics
from spellforge.selection.metrics import (
    bootstrap_ci,
    evaluate_predictions,
    mse,
    outcome_histogram,
    r_squared_corr,
)
from spellforge.selection.split import split_train_holdout


class TestSplit:
    def test_sizes_and_folds(self):
        plan = split_train_holdout(10, 0.8, seed=1, n_folds=5)
        assert (plan.train.size, plan.holdout.size) == (8, 2)
        assert plan.fold_sizes() == [2, 2, 2, 1, 1]
        assert sorted(np.concatenate([plan.train, plan.holdout]).tolist()) == list(range(10))

    def test_seeded(self):
        first = split_train_holdout(50, seed=3)
        again = split_train_holdout(50, seed=3)
        other = split_train_holdout(50, seed=4)
        np.testing.assert_array_equal(first.train, again.train)
        assert not np.array_equal(first.train, other.train)

    @pytest.mark.parametrize("n, ratio, expected", [(10, 0.7, 7), (2, 0.8, 1), (10, 0.99, 9), (5, 0.01, 1)])
    def test_train_size_rounding(self, n, ratio, expected):
        assert split_train_holdout(n, ratio, seed=0).train.size == expected

    def test_fold_rows_partition_the_training_sample(self):
        plan = split_train_holdout(23, seed=9)
        held = np.concatenate([h for _, _, h in plan.iter_folds()])
        assert sorted(held.tolist()) == sorted(plan.train.tolist())
        for _, fitting, held in plan.iter_folds():
            assert not set(fitting) & set(held)

    def test_restrict_keeps_fold_labels(self):
        plan = split_train_holdout(20, seed=2)
        keep = np.arange(20) % 2 == 0
        sub = plan.restrict(keep)
        assert set(sub.train) <= set(plan.train) and all(r % 2 == 0 for r in sub.train)
        labels = dict(zip(plan.train.tolist(), plan.folds.tolist()))
        assert all(labels[r] == f for r, f in zip(sub.train.tolist(), sub.folds.tolist()))

    def test_invalid_requests(self):
        with pytest.raises(DataError):
            split_train_holdout(1)
        with pytest.raises(ConfigError):
            split_train_holdout(10, ratio=1.0)
        with pytest.raises(ConfigError):
            split_train_holdout(10, n_folds=1)


class TestMetrics:
    def test_mse(self):
        assert mse([0.0, 1.0], [0.5, 0.5]) == 0.25
        with pytest.raises(DataError):
            mse([0.0, 1.0], [0.5])

    def test_r_squared(self):
        y = np.array([0.0, 0.2, 0.7, 1.0])
        assert r_squared_corr(y, 2 * y + 1) == pytest.approx(1.0)
        assert r_squared_corr(y, np.full(4, 0.3)) is None
        assert r_squared_corr(np.zeros(4), y) is None

    def test_bootstrap_interval_contains_the_point(self, rng):
        y = rng.uniform(size=200)
        yhat = np.clip(y + rng.normal(scale=0.1, size=200), 0, 1)
        low, high = bootstrap_ci(y, yhat, n_boot=300, level=0.95, seed=5)
        assert low <= mse(y, yhat) <= high
        assert (low, high) == bootstrap_ci(y, yhat, n_boot=300, level=0.95, seed=5)

    def test_perfect_predictions_have_a_degenerate_interval(self):
        y = np.linspace(0, 1, 30)
        assert bootstrap_ci(y, y, n_boot=100, level=0.9, seed=1) == (0.0, 0.0)

    def test_bootstrap_needs_enough_replications(self):
        with pytest.raises(ConfigError):
            bootstrap_ci([0.0, 1.0], [0.0, 1.0], n_boot=50)

    def test_evaluate_predictions(self):
        report = evaluate_predictions([0.0, 1.0, 1.0], [0.0, 1.0, 1.0], "holdout", with_ci=False)
        assert report.sample == "holdout"
        assert report.mse == 0.0 and report.r_squared == pytest.approx(1.0)
        assert report.ci_low is None and report.n_bootstrap == 0
        constant = evaluate_predictions([0.5, 0.5], [0.1, 0.9], "train", n_boot=100, seed=1)
        assert constant.r_squared is None and not constant.r_squared_defined
        assert constant.ci_low <= constant.mse <= constant.ci_high

    def test_histogram_point_masses(self):
        rows = outcome_histogram([0.0, 0.0, 0.0, 1.0, 0.5, 0.999])
        assert len(rows) == 52
        assert (rows[0].low, rows[0].high, rows[0].count) == (0.0, 0.0, 3)
        assert rows[0].density is None and rows[-1].count == 1
        assert rows[26].count == 1 and rows[26].low == pytest.approx(0.5)
        assert rows[50].count == 1
        assert rows[26].density == pytest.approx((1 / 6) / 0.02)
        assert sum(r.share for r in rows) == pytest.approx(1.0)

    def test_histogram_rejects_values_outside_the_unit_interval(self):
        with pytest.raises(DataError):
            outcome_histogram([0.2, 1.5])

    def test_interval_is_widened_to_the_point(self, monkeypatch):
        y = np.array([0.0, 1.0, 0.0, 1.0])
        yhat = np.full(4, 0.5)
        monkeypatch.setattr(metrics, "bootstrap_mse", lambda y, yhat, n_boot, seed: np.linspace(0.4, 0.6, n_boot))
        assert bootstrap_ci(y, yhat, n_boot=100, level=0.9, seed=1) == pytest.approx((0.25, 0.59))
        monkeypatch.setattr(metrics, "bootstrap_mse", lambda y, yhat, n_boot, seed: np.linspace(0.0, 0.1, n_boot))
        low, high = bootstrap_ci(y, yhat, n_boot=100, level=0.9, seed=1)
        assert low == pytest.approx(0.005) and high == 0.25

    def test_interval_always_contains_the_point(self):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(3, 40))
            y = rng.uniform(size=n)
            yhat = rng.uniform(size=n) ** 3
            low, high = bootstrap_ci(y, yhat, n_boot=100, level=0.5, seed=seed)
            assert low <= mse(y, yhat) <= high

    def test_interval_coverage(self):
        # squared errors of U(-1, 1) residuals have mean 1/3
        hits = 0
        replications = 300
        for r in range(replications):
            residual = np.random.default_rng(1000 + r).uniform(-1.0, 1.0, size=300)
            low, high = bootstrap_ci(residual, np.zeros(300), n_boot=200, level=0.95, seed=r)
            hits += low <= 1.0 / 3.0 <= high
        assert 0.90 <= hits / replications <= 0.99


class TestCrossValidation:
    def test_ols_cell_is_the_mean_fold_error(self, linear_design):
        X, y, _ = linear_design
        plan = split_train_holdout(len(y), seed=8)
        result = cross_validate("ols", None, plan, X, y, seed=8, threads=1)
        expected = np.mean(
            [mse(y[held], predict(ols_fit(X[fitting], y[fitting]), X[held])) for _, fitting, held in plan.iter_folds()]
        )
        assert result.best_mse == pytest.approx(expected)
        assert result.selected == {}
        assert not np.isnan(result.out_of_fold).any()

    def test_lasso_grid_is_relative_to_lambda_max(self, linear_design):
        X, y, _ = linear_design
        plan = split_train_holdout(len(y), seed=8)
        grid = GridSpec(params={"lambda": ParamGrid(min=1e-3, max=1.0, count=4, relative_to="lambda_max")})
        result = cross_validate("lasso", grid, plan, X, y, seed=8, threads=1)
        top = result.scales["lambda_max"]
        np.testing.assert_allclose([c["lambda"] for c in result.cells], [1e-3 * top, 1e-2 * top, 1e-1 * top, top])
        assert result.best_mse == np.nanmin(result.cell_mse)
        assert result.selected["lambda"] < top

    def test_staged_boosting_matches_separate_fits(self, linear_design):
        X, y, _ = linear_design
        plan = split_train_holdout(len(y), seed=8)
        grid = GridSpec(params={"max_splits": ParamGrid(values=[2]), "n_trees": ParamGrid(values=[3, 6])})
        staged = cross_validate("boosting", grid, plan, X, y, seed=8, threads=1)
        separate = np.mean(
            [
                mse(y[held], predict(gbt_fit(X[fitting], y[fitting], 2, 3, seed=derive_seed(8, 0, fold)), X[held]))
                for fold, fitting, held in plan.iter_folds()
            ]
        )
        assert staged.cell_mse[0] == pytest.approx(separate)

    def test_thread_count_does_not_change_results(self, linear_design):
        X, y, _ = linear_design
        plan = split_train_holdout(len(y), seed=8)
        grid = GridSpec(params={"max_splits": ParamGrid(values=[1, 2]), "n_trees": ParamGrid(values=[2, 4])})
        one = cross_validate("boosting", grid, plan, X, y, seed=8, threads=1)
        two = cross_validate("boosting", grid, plan, X, y, seed=8, threads=2)
        np.testing.assert_array_equal(one.cell_mse, two.cell_mse)

    def test_ties_go_to_the_most_regularized_cell(self):
        lasso = get_learner("lasso")
        cells = [{"lambda": 0.1}, {"lambda": 0.5}, {"lambda": 0.01}]
        assert select_cell(np.array([1.0, 1.0, 2.0]), cells, lasso) == 1
        boosting = get_learner("boosting")
        cells = [{"max_splits": 3, "n_trees": 10}, {"max_splits": 1, "n_trees": 50}, {"max_splits": 1, "n_trees": 20}]
        assert select_cell(np.array([0.5, 0.5, 0.5]), cells, boosting) == 2

    def test_failed_cells_are_skipped(self):
        lasso = get_learner("lasso")
        cells = [{"lambda": 0.1}, {"lambda": 0.5}]
        assert select_cell(np.array([np.nan, 3.0]), cells, lasso) == 1
        with pytest.raises(NumericalError):
            select_cell(np.array([np.nan, np.nan]), cells, lasso)

    def test_empty_fold(self, linear_design):
        X, y, _ = linear_design
        plan = split_train_holdout(4, 0.5, seed=1, n_folds=5)
        with pytest.raises(DataError):
            cross_validate("ols", None, plan, X[:4], y[:4])

    def test_unknown_learner(self):
        with pytest.raises(ConfigError):
            get_learner("random-forest")

    def test_lasso_selection_finds_the_planted_penalty(self):
        # three strong signals among 40 columns: the risk minimum sits near 0.1 * lambda_max
        grid = GridSpec(params={"lambda": ParamGrid(min=1e-3, max=1.0, count=7, relative_to="lambda_max")})
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(200, 40))
            y = X[:, :3].sum(axis=1) + rng.normal(size=200)
            plan = split_train_holdout(200, seed=seed)
            result = cross_validate("lasso", grid, plan, X, y, seed=seed, threads=1)
            relative = result.selected["lambda"] / result.scales["lambda_max"]
            hits += 0.03 <= relative <= 0.35
        assert hits >= 95


class TestThreads:
    def test_environment_variable(self, monkeypatch):
        monkeypatch.setenv("SPELLFORGE_THREADS", "3")
        assert resolve_threads() == 3
        assert resolve_threads(2) == 2

    @pytest.mark.parametrize("raw", ["0", "many"])
    def test_invalid_environment_variable(self, monkeypatch, raw):
        monkeypatch.setenv("SPELLFORGE_THREADS", raw)
        with pytest.raises(ConfigError):
            resolve_threads()
