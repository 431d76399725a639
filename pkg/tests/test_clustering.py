import math

import numpy as np
import pytest

from spellforge.clustering.hierarchy import agglomerate, cut, rescale_unit
from spellforge.clustering.indices import (
    calinski_harabasz,
    duda_hart,
    duda_hart_critical,
    select_k,
    ss_decomposition,
    within_ss,
)
from spellforge.clustering.profile import assign_nearest, centroids, group_summary
from spellforge.errors import ConfigError, DataError
from spellforge.features.matrix import FeatureMatrix, write_features
from spellforge.learners.codec import save_model
from spellforge.learners.linear import ols_fit
from spellforge.models import ClusterConfig
from spellforge.services.clustering import ClusterService


@pytest.fixture
def blobs(rng):
    """Five tight, well separated groups of 20 rows in three dimensions."""
    centres = np.array([[0, 0, 0], [10, 0, 0], [0, 10, 0], [0, 0, 10], [10, 10, 10]], dtype=float)
    X = np.vstack([c + 0.1 * rng.normal(size=(20, 3)) for c in centres])
    return X, np.repeat(np.arange(5), 20)


def linkage_distance(X, a, b, linkage):
    if linkage == "ward":
        na, nb = len(a), len(b)
        gap = X[a].mean(axis=0) - X[b].mean(axis=0)
        return np.sqrt(2.0 * na * nb / (na + nb)) * np.linalg.norm(gap)
    pairs = np.linalg.norm(X[a][:, None, :] - X[b][None, :, :], axis=2)
    return pairs.mean() if linkage == "average" else pairs.max()


def brute_force_merges(X, linkage):
    """Greedy merge sequence from the linkage definitions, recomputed at every step."""
    groups = [[i] for i in range(X.shape[0])]
    merged, heights = [], []
    while len(groups) > 1:
        best = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                dist = linkage_distance(X, groups[i], groups[j], linkage)
                if best is None or dist < best[0]:
                    best = (dist, i, j)
        dist, i, j = best
        union = groups[i] + groups[j]
        groups = [g for pos, g in enumerate(groups) if pos not in (i, j)] + [union]
        merged.append(frozenset(union))
        heights.append(dist)
    return merged, np.array(heights)


class TestHierarchy:
    def test_rescale_unit(self):
        scaled, constant = rescale_unit(np.array([[2.0, 7.0], [4.0, 7.0], [6.0, 7.0]]))
        np.testing.assert_allclose(scaled[:, 0], [0.0, 0.5, 1.0])
        np.testing.assert_array_equal(scaled[:, 1], 0.0)
        assert constant == [1]

    def test_rescale_rejects_non_finite_values(self):
        with pytest.raises(DataError):
            rescale_unit(np.array([[1.0], [np.inf]]))

    def test_rescale_against_reference_ranges(self):
        reference = np.array([[0.0, 5.0], [4.0, 5.0]])
        scaled, constant = rescale_unit(np.array([[2.0, 9.0], [8.0, 5.0]]), reference=reference)
        np.testing.assert_allclose(scaled[:, 0], [0.5, 2.0])
        np.testing.assert_array_equal(scaled[:, 1], 0.0)
        assert constant == [1]
        with pytest.raises(DataError):
            rescale_unit(np.zeros((2, 2)), reference=np.zeros((2, 3)))

    @pytest.mark.parametrize("linkage", ["ward", "average", "complete"])
    def test_merges_match_the_brute_force_sequence(self, linkage):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(int(rng.integers(3, 21)), int(rng.integers(1, 4))))
            d = agglomerate(X, linkage)
            merged, heights = brute_force_merges(X, linkage)
            for i, members in enumerate(merged):
                assert frozenset(d.members(d.n + i).tolist()) == members, (seed, i)
            np.testing.assert_allclose(d.merges[:, 2], heights, rtol=1e-9, atol=1e-12)

    def test_cuts_are_nested(self, rng):
        X = rng.normal(size=(25, 2))
        d = agglomerate(X)
        for k in range(1, d.n):
            coarse, fine = cut(d, k), cut(d, k + 1)
            for g in np.unique(fine):
                assert np.unique(coarse[fine == g]).size == 1

    def test_closest_rows_merge_first(self):
        d = agglomerate(np.array([[0.0], [1.0], [10.0]]))
        assert set(d.children(0)) == {0, 1}
        np.testing.assert_array_equal(d.members(d.n + 1), [0, 1, 2])
        np.testing.assert_array_equal(cut(d, 2), [1, 1, 2])

    @pytest.mark.parametrize("linkage", ["ward", "average", "complete"])
    def test_cut_recovers_planted_groups(self, blobs, linkage):
        X, truth = blobs
        labels = cut(agglomerate(X, linkage), 5)
        assert labels[0] == 1
        for g in range(5):
            assert np.unique(labels[truth == g]).size == 1
        assert np.unique(labels).size == 5

    def test_cut_bounds(self, blobs):
        d = agglomerate(blobs[0])
        np.testing.assert_array_equal(cut(d, 1), 1)
        assert np.unique(cut(d, d.n)).size == d.n
        with pytest.raises(ConfigError):
            cut(d, 0)

    def test_invalid_requests(self):
        with pytest.raises(ConfigError):
            agglomerate(np.zeros((3, 1)), "single")
        with pytest.raises(DataError):
            agglomerate(np.zeros((1, 1)))


class TestIndices:
    def test_pseudo_f_prefers_the_planted_count(self, blobs):
        X, _ = blobs
        selection = select_k(agglomerate(X), X, k_max=8)
        assert selection.k == 5
        assert len(selection.pseudo_f) == 7
        assert selection.duda_hart[0].k == 1
        assert not selection.low_confidence

    def test_pseudo_f_is_infinite_for_identical_groups(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        assert calinski_harabasz(X, np.array([1, 1, 2, 2])) == math.inf

    def test_pseudo_f_value(self):
        X = np.array([[0.0], [2.0], [10.0], [12.0]])
        # between = 4 * 25 = 100, within = 4
        assert calinski_harabasz(X, np.array([1, 1, 2, 2])) == pytest.approx((100 / 1) / (4 / 2))

    def test_duda_hart_root_split(self):
        X = np.array([[0.0], [2.0], [10.0], [12.0]])
        split = duda_hart(X, agglomerate(X), 1)
        assert split.parent_size == 4
        assert split.je1 == pytest.approx(within_ss(X))
        assert split.je2 == pytest.approx(4.0)
        assert split.ratio == pytest.approx(4.0 / 104.0)
        assert split.critical == pytest.approx(duda_hart_critical(4, 1))

    def test_duda_hart_on_identical_points(self):
        X = np.zeros((6, 2))
        split = duda_hart(X, agglomerate(X), 1)
        assert split.je1 == 0.0 and split.je2 == 0.0
        assert split.ratio == 0.0
        assert split.pseudo_t2 == 0.0
        selection = select_k(agglomerate(X), X, k_max=3)
        assert "root split separates identical points" in selection.reasons

    def test_duda_hart_with_tight_children(self):
        X = np.array([[0.0], [0.0], [0.0], [5.0], [5.0]])
        split = duda_hart(X, agglomerate(X), 1)
        assert split.je2 == 0.0
        assert split.ratio == 0.0
        assert split.pseudo_t2 == math.inf

    def test_duda_hart_ratio_lies_in_the_unit_interval(self):
        for seed in range(20):
            X = np.random.default_rng(seed).normal(size=(15, 2))
            d = agglomerate(X, "average")
            for k in range(1, d.n):
                split = duda_hart(X, d, k)
                assert 0.0 <= split.ratio <= 1.0 + 1e-12

    def test_sums_of_squares_decompose(self, rng):
        X = rng.normal(size=(40, 3))
        labels = cut(agglomerate(X), 4)
        between, within, total = ss_decomposition(X, labels)
        assert between + within == pytest.approx(total, rel=1e-9)
        assert within == pytest.approx(sum(within_ss(X[labels == g]) for g in range(1, 5)), rel=1e-9)

    def test_pseudo_f_ignores_label_names(self, rng):
        X = rng.normal(size=(30, 2))
        labels = cut(agglomerate(X), 3)
        renamed = np.array([7, 3, 5])[labels - 1]
        assert calinski_harabasz(X, renamed) == pytest.approx(calinski_harabasz(X, labels), rel=1e-12)

    def test_single_blob_is_flagged(self, rng):
        X = rng.normal(size=(60, 2))
        selection = select_k(agglomerate(X), X, k_max=6)
        assert selection.low_confidence
        assert selection.reasons

    def test_k_max_is_capped(self, rng):
        X = rng.normal(size=(4, 2))
        selection = select_k(agglomerate(X), X, k_max=10)
        assert selection.k_max == 3
        with pytest.raises(ConfigError):
            select_k(agglomerate(X[:2]), X[:2], k_max=2)


class TestProfile:
    def test_group_summary_suppresses_small_groups(self):
        X = np.array([[1.0, 0.0]] * 6 + [[3.0, 1.0]] * 2)
        labels = np.array([1] * 6 + [2] * 2)
        profile = group_summary(X, labels, ["a", "b"], min_group_size=6)
        assert profile.sizes == [6, 2]
        first, second = profile.groups
        assert first.mean == {"a": 1.0, "b": 0.0} and first.sd == {"a": 0.0, "b": 0.0}
        assert second.suppressed and second.mean == {}

    def test_group_summary_shape_errors(self):
        with pytest.raises(DataError):
            group_summary(np.zeros((3, 2)), np.array([1, 1]), ["a", "b"])
        with pytest.raises(DataError):
            group_summary(np.zeros((2, 2)), np.array([1, 1]), ["a"])

    def test_assign_nearest(self, blobs):
        X, truth = blobs
        labels = cut(agglomerate(X), 5)
        centres = centroids(X, labels, 5)
        np.testing.assert_array_equal(assign_nearest(X, centres), labels)
        np.testing.assert_array_equal(assign_nearest(np.array([[0.5]]), np.array([[0.0], [1.0]])), [1])


class TestClusterService:
    @pytest.fixture
    def model_path(self, tmp_path):
        rng = np.random.default_rng(3)
        X = FeatureMatrix(rng.uniform(size=(40, 2)), ["a", "b"], [f"T{i}" for i in range(40)])
        path = tmp_path / "model.json"
        save_model(ols_fit(X, X.column("a")), path, label="a-only")
        return path

    def run(self, tmp_path, name, model_path, comparison):
        rng = np.random.default_rng(11)
        at_risk = np.column_stack(
            [
                rng.uniform(0.95, 1.0, size=30),
                np.concatenate([rng.normal(2.0, 0.1, 15), rng.normal(8.0, 0.1, 15)]),
            ]
        )
        values = np.vstack([at_risk, comparison])
        ids = [f"P{i}" for i in range(values.shape[0])]
        features = write_features(FeatureMatrix(values, ["a", "b"], ids), tmp_path / f"{name}.csv")
        config = ClusterConfig(
            threshold=0.9, no_receipt_threshold=0.1, variables=["a", "b"], k=2, min_group_size=1
        )
        return ClusterService(tmp_path / name, threads=1).run(model_path, features, config=config, seed=1).report

    def test_groups_do_not_depend_on_the_comparison_sample(self, tmp_path, model_path):
        rng = np.random.default_rng(5)
        narrow = np.column_stack([rng.uniform(0.0, 0.05, 20), rng.uniform(1.0, 9.0, 20)])
        wide = np.column_stack([rng.uniform(0.0, 0.05, 35), rng.uniform(-40.0, 60.0, 35)])
        first = self.run(tmp_path, "narrow", model_path, narrow)
        second = self.run(tmp_path, "wide", model_path, wide)
        assert first.n_at_risk == second.n_at_risk == 30
        assert [g.model_dump() for g in first.groups] == [g.model_dump() for g in second.groups]
        assert first.labels == second.labels
        assert first.comparison.size == 20 and second.comparison.size == 35
