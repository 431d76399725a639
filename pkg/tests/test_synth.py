import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from spellforge.core.history import OUTCOME_WINDOW, outcome_proportion
from spellforge.core.io import load_cohort
from spellforge.errors import ConfigError
from spellforge.synth.dgp import DgpConfig, load_dgp
from spellforge.synth.generate import COHORT_FILES, expected_outcome, fit_link, generate, write_cohort
from spellforge.synth.oracle import oracle_r2


def packaged(**updates) -> DgpConfig:
    return DgpConfig.model_validate({**load_dgp().model_dump(), **updates})


@pytest.fixture(scope="module")
def small_cohort():
    return generate(packaged(n_persons=150, seed=3), threads=1)


class TestDgpConfig:
    def test_packaged_config(self):
        config = load_dgp()
        assert config.name == "paperlike-v1"
        assert config.oracle_r2 is None
        assert sum(config.archetype_weights()) == pytest.approx(1.0)
        assert load_dgp("paperlike-v1") == config

    def test_point_masses_cannot_exceed_one(self, tmp_path):
        with pytest.raises(ValidationError):
            packaged(p0=0.6, p1=0.5)
        path = tmp_path / "dgp.json"
        document = load_dgp().model_dump()
        document.update(p0=0.6, p1=0.5)
        path.write_text(json.dumps(document), encoding="utf-8")
        with pytest.raises(ConfigError):
            load_dgp(path)

    def test_archetypes_must_receive_income_support(self):
        document = load_dgp().model_dump()
        document["archetypes"][0]["payment_code"] = "Family Tax Benefit A"
        with pytest.raises(ValidationError):
            DgpConfig.model_validate(document)

    def test_terms_need_linked_features(self):
        with pytest.raises(ValidationError):
            packaged(interactions=[{"a": "p_not_linked", "b": "p_isdur14", "coef": 1.0}])

    def test_bad_files(self, tmp_path):
        with pytest.raises(ConfigError):
            load_dgp(tmp_path / "absent.json")
        path = tmp_path / "dgp.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_dgp(path)


class TestOutcomeLink:
    def test_cuts_at_the_point_mass_quantiles(self, rng):
        config = packaged(p0=0.3, p1=0.2)
        s = rng.normal(size=1000)
        link = fit_link(config, s)
        y = link(s)
        assert np.mean(y == 0.0) == pytest.approx(0.3, abs=0.005)
        assert np.mean(y == 1.0) == pytest.approx(0.2, abs=0.005)
        assert np.all((y >= 0.0) & (y <= 1.0))

    def test_link_is_monotone(self, rng):
        link = fit_link(packaged(), rng.normal(size=500))
        grid = np.linspace(-4, 4, 200)
        assert np.all(np.diff(link(grid)) >= 0.0)

    def test_expected_outcome_without_noise(self, rng):
        link = fit_link(packaged(), rng.normal(size=500))
        eta = np.linspace(-2, 2, 9)
        np.testing.assert_array_equal(expected_outcome(eta, 0.0, link), link(eta))

    def test_expected_outcome_averages_over_noise(self, rng):
        link = fit_link(packaged(), rng.normal(size=500))
        eta = np.array([-0.5, 0.0, 0.7])
        draws = link(eta[:, None] + 0.6 * rng.normal(size=(1, 200_000)))
        np.testing.assert_allclose(expected_outcome(eta, 0.6, link), draws.mean(axis=1), atol=0.01)


class TestGenerate:
    def test_truth_table(self, small_cohort):
        truth = small_cohort.truth
        assert list(truth.columns) == ["person_id", "archetype", "eta", "latent", "outcome", "outcome_days", "truth"]
        assert small_cohort.n == 150
        np.testing.assert_array_equal(truth["outcome_days"], np.rint(truth["outcome"] * OUTCOME_WINDOW.days))
        assert truth["truth"].between(0.0, 1.0).all()

    def test_outcome_matches_the_written_spells(self, small_cohort, tmp_path):
        files = write_cohort(small_cohort, tmp_path)
        assert set(COHORT_FILES) <= set(files)
        cohort = load_cohort(files["spells.csv"], files["persons.csv"], parent_links_path=files["parent_links.csv"])
        days = dict(zip(small_cohort.truth["person_id"], small_cohort.truth["outcome_days"]))
        for person in cohort.persons:
            assert outcome_proportion(person) == pytest.approx(days[person.person_id] / OUTCOME_WINDOW.days)

    def test_same_seed_same_cohort(self, small_cohort):
        again = generate(packaged(n_persons=150, seed=3), threads=2)
        pd.testing.assert_frame_equal(again.truth, small_cohort.truth)
        other = generate(packaged(n_persons=150, seed=4), threads=1)
        assert not np.array_equal(other.truth["latent"], small_cohort.truth["latent"])

    def test_prefix_of_a_larger_cohort(self, small_cohort):
        larger = generate(packaged(n_persons=200, seed=3), threads=1)
        pd.testing.assert_series_equal(larger.truth["eta"].iloc[:150], small_cohort.truth["eta"])

    def test_noise_free_truth_is_the_outcome(self):
        cohort = generate(packaged(n_persons=80, noise=0.0), threads=1)
        np.testing.assert_allclose(cohort.truth["truth"], cohort.truth["outcome"])

    def test_oracle_r2(self):
        value = oracle_r2(packaged(n_persons=50), draws=400, threads=1)
        assert 0.0 < value < 1.0
        assert oracle_r2(packaged(noise=0.0), draws=100, threads=1) == 1.0
