"""Shared fixtures: hand-built histories, small cohorts on disk and random designs."""

from datetime import date
from pathlib import Path

import numpy as np
import pytest

from spellforge.core.history import EmploymentSpell, LifeEvent, PersonHistory, SpellRecord
from spellforge.core.taxonomy import classify_payment
from spellforge.services.features import FeatureService
from spellforge.services.synth import SynthService


def _day(value):
    return value if isinstance(value, date) else date.fromisoformat(value)


@pytest.fixture
def spell():
    def make(pid, code, start, end, amount=None):
        return SpellRecord(pid, classify_payment(code), _day(start), _day(end), amount)

    return make


@pytest.fixture
def job():
    def make(pid, employer, start, end, income=0.0, hours=0.0):
        return EmploymentSpell(pid, employer, _day(start), _day(end), income, hours)

    return make


@pytest.fixture
def event():
    def make(pid, kind, day, value=None):
        return LifeEvent(pid, kind, _day(day), value)

    return make


@pytest.fixture
def history():
    def make(pid="P1", spells=(), jobs=(), events=(), **attributes):
        return PersonHistory(
            person_id=pid,
            spells=tuple(spells),
            demographics=dict(attributes),
            jobs=tuple(jobs),
            events=tuple(events),
        )

    return make


@pytest.fixture
def write_csv(tmp_path):
    def write(name, header, *rows):
        path = tmp_path / name
        lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture
def cohort_files(write_csv):
    """Three persons and one parent who is not a cohort member."""
    spells = write_csv(
        "spells.csv",
        ("person_id", "payment_code", "start_date", "end_date", "amount"),
        ("P2", "Newstart Allowance", "2014-03-01", "2014-06-30", "560"),
        ("P1", "Disability Support Pension", "2010-01-01", "2019-01-01", "800"),
        ("P1", "Family Tax Benefit A", "2014-01-01", "2014-12-31", ""),
        ("M3", "Parenting Payment Single", "2014-01-01", "2014-12-31", "700"),
    )
    persons = write_csv(
        "persons.csv",
        ("person_id", "attribute", "value"),
        ("P1", "sex", "F"),
        ("P1", "birth_date", "1970-05-01"),
        ("P2", "sex", "M"),
        ("P3", "birth_date", "1996-02-29"),
    )
    links = write_csv(
        "parent_links.csv",
        ("child_id", "parent_id", "role"),
        ("P3", "M3", "mother"),
    )
    return {"spells": spells, "persons": persons, "parent_links": links}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def linear_design(rng):
    """200 x 5 design whose outcome depends on the first two columns only."""
    X = rng.normal(size=(200, 5))
    beta = np.array([1.5, -2.0, 0.0, 0.0, 0.0])
    y = 0.5 + X @ beta + 0.1 * rng.normal(size=200)
    return X, y, beta


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory) -> Path:
    """A small packaged-config cohort written once per session."""
    out = tmp_path_factory.mktemp("synth")
    SynthService(out).run(seed=7, n_persons=120)
    return out


@pytest.fixture(scope="session")
def feature_dir(synth_dir, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("features")
    FeatureService(out).run(
        synth_dir / "spells.csv",
        synth_dir / "persons.csv",
        jobs=synth_dir / "jobs.csv",
        events=synth_dir / "events.csv",
        parent_links=synth_dir / "parent_links.csv",
    )
    return out
