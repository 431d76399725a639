"""Persons, dated payment spells, observation windows and the outcome variable."""

from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Mapping, Optional, Tuple, Union

import numpy as np

from spellforge.core.taxonomy import ANY_IS, PaymentCategory, PaymentFilter
from spellforge.errors import DataError

EARLIEST_DATE = date(2000, 1, 1)
LATEST_DATE = date(2019, 10, 14)

FilterSpec = Union[str, PaymentFilter, Iterable[str]]


@dataclass(frozen=True, slots=True)
class ObservationWindow:
    """Inclusive calendar window ``[first_day, last_day]``."""

    first_day: date
    last_day: date

    def __post_init__(self):
        if self.first_day > self.last_day:
            raise DataError(
                f"empty observation window {self.first_day}..{self.last_day}",
                {"first_day": str(self.first_day), "last_day": str(self.last_day)},
            )

    @property
    def days(self) -> int:
        return day_count(self)

    def offset(self, day: date) -> int:
        return (day - self.first_day).days

    def clip(self, start: date, end: date) -> Optional[Tuple[int, int]]:
        """Window-relative inclusive offsets of ``[start, end]``, or None if disjoint."""
        lo = max(start, self.first_day)
        hi = min(end, self.last_day)
        if lo > hi:
            return None
        return self.offset(lo), self.offset(hi)

    def contains(self, day: date) -> bool:
        return self.first_day <= day <= self.last_day

    def day_at(self, offset: int) -> date:
        return self.first_day + timedelta(days=offset)

    @classmethod
    def year(cls, year: int) -> "ObservationWindow":
        return cls(date(year, 1, 1), date(year, 12, 31))

    @classmethod
    def parse(cls, text: str) -> "ObservationWindow":
        """Parse ``"2014"`` or ``"2011-2014"`` into whole calendar years."""
        parts = str(text).split("-")
        try:
            years = [int(p) for p in parts]
        except ValueError:
            raise DataError(f"cannot parse window {text!r}") from None
        if len(years) == 1:
            return cls.year(years[0])
        if len(years) == 2:
            return cls(date(years[0], 1, 1), date(years[1], 12, 31))
        raise DataError(f"cannot parse window {text!r}")

    def label(self) -> str:
        if self.first_day.year == self.last_day.year:
            return str(self.first_day.year)
        return f"{self.first_day.year}_{self.last_day.year}"


OUTCOME_WINDOW = ObservationWindow(date(2015, 1, 1), date(2018, 12, 31))
BASE_YEAR = ObservationWindow.year(2014)
REFERENCE_DATE = date(2014, 1, 1)


def _check_dates(start: date, end: date, what: str):
    if start > end:
        raise DataError(f"{what} starts after it ends: {start} > {end}")
    if start < EARLIEST_DATE or end > LATEST_DATE:
        raise DataError(
            f"{what} dates {start}..{end} fall outside {EARLIEST_DATE}..{LATEST_DATE}"
        )


@dataclass(frozen=True, slots=True)
class SpellRecord:
    """One dated payment spell for one person; ``end`` is inclusive."""

    person_id: str
    category: PaymentCategory
    start: date
    end: date
    amount: Optional[float] = None  # per fortnight

    def __post_init__(self):
        _check_dates(self.start, self.end, f"spell of {self.person_id}")


@dataclass(frozen=True, slots=True)
class EmploymentSpell:
    """One job held by one person, with fortnightly income and hours."""

    person_id: str
    employer_id: str
    start: date
    end: date
    income: float = 0.0
    hours: float = 0.0

    def __post_init__(self):
        _check_dates(self.start, self.end, f"job of {self.person_id}")


EVENT_KINDS = frozenset({"move", "suspension", "breach", "relationship", "rent", "advance"})


@dataclass(frozen=True, slots=True)
class LifeEvent:
    person_id: str
    kind: str
    day: date
    value: Optional[str] = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise DataError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class PersonHistory:
    """Everything known about one person: spells, jobs, events and raw attributes."""

    person_id: str
    spells: Tuple[SpellRecord, ...] = ()
    demographics: Mapping[str, str] = field(default_factory=dict)
    jobs: Tuple[EmploymentSpell, ...] = ()
    events: Tuple[LifeEvent, ...] = ()

    def __post_init__(self):
        for record in (*self.spells, *self.jobs, *self.events):
            if record.person_id != self.person_id:
                raise DataError(
                    f"record for {record.person_id!r} attached to history of "
                    f"{self.person_id!r}"
                )

    def attribute(self, name: str) -> Optional[str]:
        value = self.demographics.get(name)
        if value is None or value == "":
            return None
        return value

    def birth_date(self) -> Optional[date]:
        value = self.attribute("birth_date")
        if value is None:
            return None
        try:
            return date.fromisoformat(value)
        except ValueError:
            raise DataError(f"bad birth_date {value!r} for {self.person_id}") from None

    def age_on(self, day: date) -> Optional[int]:
        born = self.birth_date()
        if born is None:
            return None
        return day.year - born.year - ((day.month, day.day) < (born.month, born.day))


def day_count(w: ObservationWindow) -> int:
    """Inclusive number of calendar days in the window."""
    return (w.last_day - w.first_day).days + 1


def coverage_mask(
    spells: Iterable[SpellRecord], w: ObservationWindow, spell_filter: FilterSpec = ANY_IS
) -> np.ndarray:
    """Boolean per-day coverage of the window by spells passing the filter."""
    accepts = PaymentFilter.parse(spell_filter).accepts
    mask = np.zeros(day_count(w), dtype=bool)
    for spell in spells:
        if not accepts(spell.category):
            continue
        span = w.clip(spell.start, spell.end)
        if span is not None:
            mask[span[0] : span[1] + 1] = True
    return mask


def covered_days(
    h: PersonHistory, w: ObservationWindow, spell_filter: FilterSpec = ANY_IS
) -> int:
    return int(coverage_mask(h.spells, w, spell_filter).sum())


def outcome_proportion(
    h: PersonHistory, w: ObservationWindow = OUTCOME_WINDOW, spell_filter: FilterSpec = ANY_IS
) -> float:
    """Share of window days covered by at least one qualifying spell.

    Overlapping spells count each day once.
    """
    return covered_days(h, w, spell_filter) / day_count(w)
