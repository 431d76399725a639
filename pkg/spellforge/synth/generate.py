"""Synthetic cohorts with a planted outcome link.

Each person draws an archetype, demographics, 2011-2014 payment spells, jobs
and life events from a generator keyed by their row index. A latent score is
built from catalog features of the 2014 history; its cohort quantiles place
the point masses at 0 and 1 and a Beta CDF shapes the interior. The outcome is
then written back as 2015-2018 spells covering ``round(y * 1461)`` days.
"""

import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import delayed
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import betainc

from spellforge.core.history import (
    OUTCOME_WINDOW,
    EmploymentSpell,
    LifeEvent,
    PersonHistory,
    SpellRecord,
)
from spellforge.core.io import (
    EVENT_COLUMNS,
    JOB_COLUMNS,
    PARENT_LINK_COLUMNS,
    PERSON_COLUMNS,
    SPELL_COLUMNS,
    Cohort,
)
from spellforge.core.taxonomy import classify_payment
from spellforge.dependencies import chunked, derive_rng, get_parallel, resolve_threads
from spellforge.errors import ConfigError
from spellforge.features.catalog import CatalogEntry, FeatureCatalog
from spellforge.features.derive import derive_feature
from spellforge.synth.dgp import DgpConfig

logger = logging.getLogger(__name__)

OUTCOME_DAYS = OUTCOME_WINDOW.days
HERMITE_NODES = 40

OVERSEAS = (
    "New Zealand", "United Kingdom", "China", "India", "Vietnam", "Philippines",
    "South Africa", "Fiji", "Indonesia", "Hong Kong", "Taiwan", "United States of America",
    "Papua New Guinea", "Samoa", "Tonga", "Iraq", "Afghanistan", "Sudan",
)
STATES = ("NSW", "VIC", "QLD", "WA", "SA", "TAS", "ACT", "NT")
STATE_WEIGHTS = (0.32, 0.25, 0.20, 0.10, 0.07, 0.03, 0.015, 0.015)
SA3 = tuple(f"{s}{i:02d}" for s, top in (("101", 10), ("201", 5), ("301", 5)) for i in range(1, top + 1))
POSTCODES = (
    "2000", "2010", "2150", "2170", "2560", "2750", "3000", "3030", "3175", "3200",
    "4000", "4110", "4300", "5000", "5110", "6000", "6100", "7000", "0800", "2600", "2480", "3550",
)
EDUCATION = ("y10", "y12", "cert1", "cert2", "cert3", "cert4", "diploma", "bachelor")
EDUCATION_WEIGHTS = (0.22, 0.24, 0.04, 0.06, 0.16, 0.09, 0.08, 0.11)
TENURES = ("own", "shared", "nonshared", "parental", "exempt")
TENURE_WEIGHTS = (0.18, 0.22, 0.34, 0.18, 0.08)
PARENT_CODES = (
    "Newstart Allowance", "Disability Support Pension", "Parenting Payment Single", "Carer Payment",
)
FAMILY_PAYMENT = "Family Tax Benefit A"

_YEAR_2014 = (date(2014, 1, 1), date(2014, 12, 31))


def person_id(index: int) -> str:
    return f"P{index:07d}"


def _days(start: date, end: date) -> int:
    return (end - start).days + 1


def _money(value: float) -> float:
    return round(float(value), 2)


# person draws


@dataclass
class SynthPerson:
    """One generated person before the outcome is attached."""

    index: int
    archetype: int
    history: PersonHistory
    parents: List[PersonHistory] = field(default_factory=list)
    links: List[Tuple[str, str, str]] = field(default_factory=list)
    features: np.ndarray = field(default_factory=lambda: np.zeros(0))
    noise: float = 0.0


def _segments(start: date, end: date, pieces: int, rng: np.random.Generator) -> List[Tuple[date, date]]:
    """Split ``[start, end]`` into up to ``pieces`` contiguous runs."""
    total = _days(start, end)
    pieces = max(1, min(pieces, total))
    cuts = np.sort(rng.choice(np.arange(1, total), size=pieces - 1, replace=False)) if pieces > 1 else []
    bounds = [0, *[int(c) for c in cuts], total]
    return [
        (start + timedelta(days=lo), start + timedelta(days=hi - 1))
        for lo, hi in zip(bounds[:-1], bounds[1:])
    ]


def _payment_spells(pid, code, start, end, amount, spread, rng, pieces=1, gaps=False):
    spells = []
    runs = _segments(start, end, pieces, rng)
    for i, (lo, hi) in enumerate(runs):
        if gaps and i + 1 < len(runs) and _days(lo, hi) > 14 and rng.random() < 0.4:
            hi -= timedelta(days=int(rng.integers(1, min(28, _days(lo, hi) - 1) + 1)))
        value = amount * max(0.2, 1.0 + spread * rng.standard_normal())
        spells.append(SpellRecord(pid, classify_payment(code), lo, hi, _money(value)))
    return spells


def _demographics(arch, rng: np.random.Generator) -> Dict[str, str]:
    age = int(rng.integers(arch.age_low, arch.age_high + 1))
    born = date(2013 - age, 1, 2) + timedelta(days=int(rng.integers(0, 364)))
    overseas = rng.random() < arch.overseas_share
    attributes = {
        "birth_date": born.isoformat(),
        "sex": "F" if rng.random() < arch.female_share else "M",
        "country_of_birth": str(rng.choice(OVERSEAS)) if overseas else "Australia",
        "indigenous": "Y" if not overseas and rng.random() < arch.indigenous_share else "N",
        "parent": "Y" if rng.random() < arch.parent_share else "N",
        "state": str(rng.choice(STATES, p=STATE_WEIGHTS)),
        "sa3": str(rng.choice(SA3)),
        "postcode": str(rng.choice(POSTCODES)),
        "marital_status": "partnered" if rng.random() < 0.3 else "single",
        "homeless": "Y" if rng.random() < 0.02 else "N",
        "student": "Y" if age <= 24 and rng.random() < 0.2 else "N",
    }
    if rng.random() > 0.08:
        attributes["education"] = str(rng.choice(EDUCATION, p=EDUCATION_WEIGHTS))
    tenure = str(rng.choice(TENURES, p=TENURE_WEIGHTS))
    attributes["housing_tenure"] = tenure
    if tenure in ("shared", "nonshared"):
        attributes["rent_type"] = "private" if rng.random() < 0.75 else str(rng.choice(("public", "other")))
    if rng.random() < 0.05:
        attributes["carer_of"] = "child" if rng.random() < 0.4 else "adult"
    return attributes


def _spells(pid: str, arch, attributes: Dict[str, str], rng: np.random.Generator) -> List[SpellRecord]:
    amount = arch.base_amount * float(np.exp(0.1 * rng.standard_normal()))
    spread = arch.amount_spread
    spells: List[SpellRecord] = []
    if rng.random() < arch.always_on_share:
        for year in (2011, 2012, 2013, 2014):
            pieces = int(rng.integers(1, 5)) if year == 2014 else 1
            spells += _payment_spells(
                pid, arch.payment_code, date(year, 1, 1), date(year, 12, 31), amount, spread, rng, pieces
            )
    else:
        for year in (2011, 2012, 2013):
            if rng.random() < 0.7 * arch.is_share:
                length = int(rng.integers(14, 366))
                first = date(year, 1, 1) + timedelta(days=int(rng.integers(0, 366 - length)))
                spells += _payment_spells(
                    pid, arch.payment_code, first, first + timedelta(days=length - 1), amount, spread, rng
                )
        if rng.random() < arch.is_share:
            share = rng.beta(arch.coverage_a, arch.coverage_b)
            length = max(14, int(round(share * 365)))
            first = _YEAR_2014[0] + timedelta(days=int(rng.integers(0, 366 - length)))
            spells += _payment_spells(
                pid,
                arch.payment_code,
                first,
                first + timedelta(days=length - 1),
                amount,
                spread,
                rng,
                pieces=int(rng.integers(1, 4)),
                gaps=True,
            )
    if attributes.get("parent") == "Y":
        spells += _payment_spells(pid, FAMILY_PAYMENT, *_YEAR_2014, 210.0, 0.1, rng)
    return spells


def _jobs(pid: str, arch, rng: np.random.Generator) -> List[EmploymentSpell]:
    jobs = []
    for j in range(int(rng.poisson(arch.job_rate))):
        start = date(2013, 7, 1) + timedelta(days=int(rng.integers(0, 540)))
        end = min(start + timedelta(days=int(rng.integers(14, 400))), _YEAR_2014[1])
        if rng.random() < 0.08:
            hours, income = 0.0, float(rng.uniform(50.0, 300.0))
        else:
            hours = float(rng.uniform(8.0, 76.0))
            income = hours * float(rng.uniform(15.0, 35.0))
        jobs.append(EmploymentSpell(pid, f"E{int(rng.integers(1, 5000)):05d}", start, end, _money(income), _money(hours)))
    return jobs


def _random_day(rng: np.random.Generator) -> date:
    return _YEAR_2014[0] + timedelta(days=int(rng.integers(0, 365)))


def _events(pid: str, arch, attributes: Dict[str, str], rng: np.random.Generator) -> List[LifeEvent]:
    events = []
    for kind, rate in (
        ("move", arch.move_rate),
        ("suspension", arch.suspension_rate),
        ("breach", arch.suspension_rate / 3.0),
        ("advance", 0.2),
    ):
        events += [LifeEvent(pid, kind, _random_day(rng)) for _ in range(int(rng.poisson(rate)))]
    if rng.random() < 0.1:
        status = "single" if attributes["marital_status"] == "partnered" else "partnered"
        events.append(LifeEvent(pid, "relationship", _random_day(rng), status))
    if attributes.get("rent_type") is not None:
        rent = float(rng.uniform(150.0, 450.0))
        events.append(LifeEvent(pid, "rent", date(2013, 7, 1), f"{rent:.2f}"))
        if rng.random() < 0.3:
            events.append(LifeEvent(pid, "rent", _random_day(rng), f"{rent * 1.05:.2f}"))
    return sorted(events, key=lambda e: e.day)


def _parents(pid: str, arch, rng: np.random.Generator):
    histories, links = [], []
    if rng.random() >= arch.linked_parents_share:
        return histories, links
    for role in ("mother", "father"):
        if rng.random() < 0.2:
            continue
        parent = f"{pid}-{role[0]}"
        links.append((pid, parent, role))
        spells: List[SpellRecord] = []
        if rng.random() < arch.parent_is_share:
            code = str(rng.choice(PARENT_CODES))
            first = date(int(rng.integers(2000, 2015)), 1, 1)
            end = min(first + timedelta(days=int(rng.integers(60, 1800))), _YEAR_2014[1])
            spells = _payment_spells(parent, code, first, end, 600.0, 0.1, rng, pieces=int(rng.integers(1, 3)))
        histories.append(PersonHistory(parent, spells=tuple(spells)))
    return histories, links


def _feature_values(history: PersonHistory, entries: Sequence[CatalogEntry]) -> np.ndarray:
    return np.array([float(derive_feature(e, history)[0]) for e in entries])


def draw_person(config: DgpConfig, index: int, entries: Sequence[CatalogEntry]) -> SynthPerson:
    """Everything about person ``index`` except the 2015-2018 outcome."""
    rng = derive_rng(config.seed, index, 0)
    which = int(rng.choice(len(config.archetypes), p=config.archetype_weights()))
    arch = config.archetypes[which]
    pid = person_id(index)
    attributes = _demographics(arch, rng)
    spells = _spells(pid, arch, attributes, rng)
    history = PersonHistory(
        person_id=pid,
        spells=tuple(sorted(spells, key=lambda s: (s.start, s.end))),
        demographics=attributes,
        jobs=tuple(sorted(_jobs(pid, arch, rng), key=lambda j: (j.start, j.end))),
        events=tuple(_events(pid, arch, attributes, rng)),
    )
    parents, links = _parents(pid, arch, rng)
    return SynthPerson(
        index=index,
        archetype=which,
        history=history,
        parents=parents,
        links=links,
        features=_feature_values(history, entries),
        noise=float(rng.standard_normal()),
    )


def _draw_chunk(config: DgpConfig, indices: Sequence[int], entries: Sequence[CatalogEntry]) -> List[SynthPerson]:
    return [draw_person(config, i, entries) for i in indices]


def link_entries(config: DgpConfig, catalog: Optional[FeatureCatalog] = None) -> List[CatalogEntry]:
    catalog = catalog if catalog is not None else FeatureCatalog.load()
    entries = []
    for name in config.link_features():
        entry = catalog.entry(name)
        if entry.column_level or len(entry.column_names()) != 1:
            raise ConfigError(f"dgp link {name!r} must be a single-column derived feature")
        if entry.params.get("person", "self") != "self":
            raise ConfigError(f"dgp link {name!r} reads a parent's history; links use the person's own")
        entries.append(entry)
    return entries


def draw_persons(
    config: DgpConfig,
    n: Optional[int] = None,
    catalog: Optional[FeatureCatalog] = None,
    threads: Optional[int] = None,
) -> List[SynthPerson]:
    n = config.n_persons if n is None else n
    entries = link_entries(config, catalog)
    n_jobs = resolve_threads(threads)
    chunks = get_parallel(n_jobs)(
        delayed(_draw_chunk)(config, chunk, entries) for chunk in chunked(range(n), n_jobs * 4)
    )
    return [person for chunk in chunks for person in chunk]


# outcome link


@dataclass(frozen=True)
class OutcomeLink:
    """Maps a latent score to an outcome in [0, 1].

    Scores at or below ``low`` give 0, at or above ``high`` give 1, and the
    Beta(a, b) CDF of the relative position in between otherwise.
    """

    low: float
    high: float
    shape_a: float
    shape_b: float

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.high <= self.low:
            return (s > self.low).astype(float)
        position = np.clip((s - self.low) / (self.high - self.low), 0.0, 1.0)
        return betainc(self.shape_a, self.shape_b, position)


def fit_link(config: DgpConfig, s: np.ndarray) -> OutcomeLink:
    """Cuts at the cohort quantiles ``p0`` and ``1 - p1`` of the latent score."""
    low = float(np.quantile(s, config.p0)) if config.p0 > 0 else float(s.min()) - 1e-9
    high = float(np.quantile(s, 1.0 - config.p1)) if config.p1 > 0 else float(s.max()) + 1e-9
    return OutcomeLink(low, max(low, high), config.shape_a, config.shape_b)


def linear_index(config: DgpConfig, features: np.ndarray, archetypes: np.ndarray) -> np.ndarray:
    """Noise-free latent score ``eta`` for each row of ``features``."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    position = {name: j for j, name in enumerate(config.link_features())}
    z = np.zeros_like(features)
    eta = np.array([config.archetypes[a].shift for a in archetypes], dtype=float)
    for link in config.links:
        j = position[link.feature]
        z[:, j] = (features[:, j] - link.center) / link.scale
        eta += link.coef * z[:, j]
    for term in config.interactions:
        eta += term.coef * z[:, position[term.a]] * z[:, position[term.b]]
    for term in config.nonlinear:
        v = z[:, position[term.feature]]
        if term.kind == "square":
            eta += term.coef * v * v
        elif term.kind == "abs":
            eta += term.coef * np.abs(v)
        else:
            eta += term.coef * (v > term.threshold)
    return eta


def expected_outcome(eta: np.ndarray, noise: float, link: OutcomeLink, nodes: int = HERMITE_NODES) -> np.ndarray:
    """E[link(eta + noise * e)] over standard normal ``e`` by Gauss-Hermite quadrature."""
    eta = np.asarray(eta, dtype=float)
    if noise == 0:
        return link(eta)
    x, w = hermegauss(nodes)
    w = w / np.sqrt(2.0 * np.pi)
    return link(eta[:, None] + noise * x[None, :]) @ w


@dataclass
class LatentDraw:
    archetypes: np.ndarray
    eta: np.ndarray
    latent: np.ndarray
    outcome: np.ndarray
    truth: np.ndarray
    link: OutcomeLink


def latent_outcomes(config: DgpConfig, persons: Sequence[SynthPerson]) -> LatentDraw:
    archetypes = np.array([p.archetype for p in persons], dtype=np.int64)
    width = len(config.link_features())
    features = np.vstack([p.features for p in persons]) if width else np.zeros((len(persons), 0))
    eta = linear_index(config, features, archetypes)
    latent = eta + config.noise * np.array([p.noise for p in persons])
    link = fit_link(config, latent)
    return LatentDraw(
        archetypes=archetypes,
        eta=eta,
        latent=latent,
        outcome=link(latent),
        truth=expected_outcome(eta, config.noise, link),
        link=link,
    )


def outcome_spells(person: PersonHistory, days: int, code: str, amount: float, rng) -> List[SpellRecord]:
    """Spells covering exactly ``days`` days of the outcome window."""
    if days <= 0:
        return []
    window = OUTCOME_WINDOW
    offset = int(rng.integers(0, OUTCOME_DAYS - days + 1))
    first = window.day_at(offset)
    pieces = 1 if days < 60 else int(rng.integers(1, 4))
    return _payment_spells(
        person.person_id, code, first, first + timedelta(days=days - 1), amount, 0.05, rng, pieces
    )


# cohort


@dataclass
class SynthCohort:
    """Generated persons with their outcomes, linked parents and the hidden truth table."""

    config: DgpConfig
    persons: List[PersonHistory]
    parents: List[PersonHistory]
    parent_links: List[Tuple[str, str, str]]
    truth: pd.DataFrame

    @property
    def n(self) -> int:
        return len(self.persons)

    def cohort(self) -> Cohort:
        links: Dict[str, List[Tuple[str, str]]] = {}
        for child, parent, role in self.parent_links:
            links.setdefault(child, []).append((parent, role))
        return Cohort(
            persons=list(self.persons),
            others={p.person_id: p for p in self.parents if p.spells},
            parent_links=links,
        )


def generate(
    config: DgpConfig,
    catalog: Optional[FeatureCatalog] = None,
    threads: Optional[int] = None,
) -> SynthCohort:
    """Deterministic cohort of ``config.n_persons`` persons."""
    people = draw_persons(config, catalog=catalog, threads=threads)
    draw = latent_outcomes(config, people)
    days = np.rint(draw.outcome * OUTCOME_DAYS).astype(np.int64)

    persons = []
    for person, d in zip(people, days):
        arch = config.archetypes[person.archetype]
        rng = derive_rng(config.seed, person.index, 1)
        history = person.history
        extra = outcome_spells(history, int(d), arch.receipt_code, arch.base_amount, rng)
        persons.append(
            PersonHistory(
                person_id=history.person_id,
                spells=history.spells + tuple(extra),
                demographics=history.demographics,
                jobs=history.jobs,
                events=history.events,
            )
        )

    truth = pd.DataFrame(
        {
            "person_id": [p.person_id for p in persons],
            "archetype": [config.archetypes[a].name for a in draw.archetypes],
            "eta": draw.eta,
            "latent": draw.latent,
            "outcome": draw.outcome,
            "outcome_days": days,
            "truth": draw.truth,
        }
    )
    zero, one = float(np.mean(days == 0)), float(np.mean(days == OUTCOME_DAYS))
    logger.info(
        "Generated %d persons (dgp %s): %.3f never on IS, %.3f always on IS",
        len(persons), config.name, zero, one,
    )
    return SynthCohort(
        config=config,
        persons=persons,
        parents=[p for person in people for p in person.parents],
        parent_links=[link for person in people for link in person.links],
        truth=truth,
    )


# files

COHORT_FILES = ("spells.csv", "persons.csv", "jobs.csv", "events.csv", "parent_links.csv", "truth.csv")


def _iso(day: date) -> str:
    return day.isoformat()


def _spell_rows(histories: Sequence[PersonHistory]):
    for h in histories:
        for s in h.spells:
            yield h.person_id, s.category.code, _iso(s.start), _iso(s.end), s.amount


def write_cohort(cohort: SynthCohort, out_dir: Path) -> Dict[str, Path]:
    """Write the core-data CSVs and ``truth.csv``; returns paths by file name."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = {
        "spells.csv": pd.DataFrame(
            list(_spell_rows([*cohort.persons, *cohort.parents])), columns=list(SPELL_COLUMNS)
        ),
        "persons.csv": pd.DataFrame(
            [(h.person_id, k, v) for h in cohort.persons for k, v in h.demographics.items()],
            columns=list(PERSON_COLUMNS),
        ),
        "jobs.csv": pd.DataFrame(
            [
                (j.person_id, j.employer_id, _iso(j.start), _iso(j.end), j.income, j.hours)
                for h in cohort.persons
                for j in h.jobs
            ],
            columns=list(JOB_COLUMNS),
        ),
        "events.csv": pd.DataFrame(
            [(e.person_id, e.kind, _iso(e.day), e.value) for h in cohort.persons for e in h.events],
            columns=list(EVENT_COLUMNS),
        ),
        "parent_links.csv": pd.DataFrame(cohort.parent_links, columns=list(PARENT_LINK_COLUMNS)),
        "truth.csv": cohort.truth,
    }
    paths = {}
    for name, frame in tables.items():
        path = out_dir / name
        frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
        paths[name] = path
    logger.info("Wrote %s to %s", ", ".join(tables), out_dir)
    return paths
