"""CSV ingestion for spells, persons, jobs, events and parent links."""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from spellforge.core.history import EmploymentSpell, LifeEvent, PersonHistory, SpellRecord
from spellforge.core.taxonomy import classify_payment
from spellforge.errors import DataError, SchemaError, UnknownPaymentCodeError

logger = logging.getLogger(__name__)

SPELL_COLUMNS = ("person_id", "payment_code", "start_date", "end_date", "amount")
PERSON_COLUMNS = ("person_id", "attribute", "value")
JOB_COLUMNS = ("person_id", "employer_id", "start_date", "end_date", "income", "hours")
EVENT_COLUMNS = ("person_id", "event", "date", "value")
PARENT_LINK_COLUMNS = ("child_id", "parent_id", "role")
PARENT_ROLES = ("father", "mother")


@dataclass
class Cohort:
    """Cohort members in input order plus histories of linked non-members (parents)."""

    persons: List[PersonHistory]
    others: Dict[str, PersonHistory] = field(default_factory=dict)
    parent_links: Dict[str, List[Tuple[str, str]]] = field(default_factory=dict)

    def lookup(self, person_id: str) -> Optional[PersonHistory]:
        if person_id in self.others:
            return self.others[person_id]
        for person in self.persons:
            if person.person_id == person_id:
                return person
        return None

    def parents_of(self, person_id: str, role: str = "any") -> Optional[List[PersonHistory]]:
        """Linked parent histories, or None when the person has no link of that role."""
        links = self.parent_links.get(person_id, [])
        chosen = [pid for pid, r in links if role == "any" or r == role]
        if not chosen:
            return None
        index = self._index()
        return [index.get(pid, PersonHistory(pid)) for pid in chosen]

    def _index(self) -> Dict[str, PersonHistory]:
        cached = getattr(self, "_cached_index", None)
        if cached is None:
            cached = {**{p.person_id: p for p in self.persons}, **self.others}
            self._cached_index = cached
        return cached


def _read(path: Path, columns: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file not found: {path}", path=str(path))
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot parse {path.name}: {exc}", path=str(path)) from exc
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SchemaError(
            f"{path.name} lacks column(s) {', '.join(missing)}",
            row=1,
            column=missing[0],
            path=str(path),
        )
    return frame


def _dates(frame: pd.DataFrame, column: str, path: Path) -> pd.Series:
    parsed = pd.to_datetime(frame[column], format="%Y-%m-%d", errors="coerce")
    bad = parsed.isna()
    if bad.any():
        row = int(bad.to_numpy().nonzero()[0][0])
        raise SchemaError(
            f"{path.name}: bad ISO-8601 date {frame[column].iloc[row]!r}",
            row=row + 2,
            column=column,
            path=str(path),
        )
    return parsed.dt.date


def _numbers(frame: pd.DataFrame, column: str, path: Path, allow_blank: bool) -> pd.Series:
    raw = frame[column].str.strip()
    parsed = pd.to_numeric(raw.where(raw != ""), errors="coerce")
    bad = parsed.isna() & ((raw != "") | (not allow_blank))
    if bad.any():
        row = int(bad.to_numpy().nonzero()[0][0])
        raise SchemaError(
            f"{path.name}: bad number {raw.iloc[row]!r}",
            row=row + 2,
            column=column,
            path=str(path),
        )
    return parsed


def read_spells(path: Path) -> Dict[str, List[SpellRecord]]:
    path = Path(path)
    frame = _read(path, SPELL_COLUMNS)
    starts = _dates(frame, "start_date", path)
    ends = _dates(frame, "end_date", path)
    amounts = _numbers(frame, "amount", path, allow_blank=True)
    grouped: Dict[str, List[SpellRecord]] = defaultdict(list)
    for row, (pid, code, start, end, amount) in enumerate(
        zip(frame["person_id"], frame["payment_code"], starts, ends, amounts)
    ):
        try:
            grouped[pid].append(
                SpellRecord(
                    pid,
                    classify_payment(code),
                    start,
                    end,
                    None if pd.isna(amount) else float(amount),
                )
            )
        except UnknownPaymentCodeError as exc:
            raise SchemaError(exc.message, row=row + 2, column="payment_code", path=str(path))
        except DataError as exc:
            raise SchemaError(exc.message, row=row + 2, column="start_date", path=str(path))
    return grouped


def read_persons(path: Path) -> Dict[str, Dict[str, str]]:
    """Long-format demographics, keyed by person in first-seen order."""
    frame = _read(Path(path), PERSON_COLUMNS)
    persons: Dict[str, Dict[str, str]] = {}
    for pid, attribute, value in zip(frame["person_id"], frame["attribute"], frame["value"]):
        attrs = persons.setdefault(pid, {})
        if attribute:
            attrs[attribute] = value
    return persons


def read_jobs(path: Path) -> Dict[str, List[EmploymentSpell]]:
    path = Path(path)
    frame = _read(path, JOB_COLUMNS)
    starts = _dates(frame, "start_date", path)
    ends = _dates(frame, "end_date", path)
    income = _numbers(frame, "income", path, allow_blank=False)
    hours = _numbers(frame, "hours", path, allow_blank=False)
    grouped: Dict[str, List[EmploymentSpell]] = defaultdict(list)
    for row, values in enumerate(
        zip(frame["person_id"], frame["employer_id"], starts, ends, income, hours)
    ):
        pid, employer, start, end, inc, hrs = values
        try:
            grouped[pid].append(EmploymentSpell(pid, employer, start, end, float(inc), float(hrs)))
        except DataError as exc:
            raise SchemaError(exc.message, row=row + 2, column="start_date", path=str(path))
    return grouped


def read_events(path: Path) -> Dict[str, List[LifeEvent]]:
    path = Path(path)
    frame = _read(path, EVENT_COLUMNS)
    days = _dates(frame, "date", path)
    grouped: Dict[str, List[LifeEvent]] = defaultdict(list)
    for row, (pid, kind, day, value) in enumerate(
        zip(frame["person_id"], frame["event"], days, frame["value"])
    ):
        try:
            grouped[pid].append(LifeEvent(pid, kind, day, value or None))
        except DataError as exc:
            raise SchemaError(exc.message, row=row + 2, column="event", path=str(path))
    return grouped


def read_parent_links(path: Path) -> Dict[str, List[Tuple[str, str]]]:
    path = Path(path)
    frame = _read(path, PARENT_LINK_COLUMNS)
    links: Dict[str, List[Tuple[str, str]]] = defaultdict(list)
    for row, (child, parent, role) in enumerate(
        zip(frame["child_id"], frame["parent_id"], frame["role"])
    ):
        if role not in PARENT_ROLES:
            raise SchemaError(
                f"{path.name}: role must be one of {PARENT_ROLES}, got {role!r}",
                row=row + 2,
                column="role",
                path=str(path),
            )
        links[child].append((parent, role))
    return dict(links)


def load_cohort(
    spells_path: Path,
    persons_path: Path,
    jobs_path: Optional[Path] = None,
    events_path: Optional[Path] = None,
    parent_links_path: Optional[Path] = None,
) -> Cohort:
    """Assemble person histories; rows follow persons.csv first-seen order."""
    spells = read_spells(spells_path)
    demographics = read_persons(persons_path)
    jobs = read_jobs(jobs_path) if jobs_path else {}
    events = read_events(events_path) if events_path else {}
    links = read_parent_links(parent_links_path) if parent_links_path else {}

    def history(pid: str) -> PersonHistory:
        return PersonHistory(
            person_id=pid,
            spells=tuple(sorted(spells.get(pid, ()), key=lambda s: (s.start, s.end))),
            demographics=demographics.get(pid, {}),
            jobs=tuple(sorted(jobs.get(pid, ()), key=lambda j: (j.start, j.end))),
            events=tuple(sorted(events.get(pid, ()), key=lambda e: e.day)),
        )

    persons = [history(pid) for pid in demographics]
    others = {pid: history(pid) for pid in spells if pid not in demographics}
    logger.info(
        "Loaded %d persons (%d linked non-members) from %s",
        len(persons),
        len(others),
        Path(spells_path).name,
    )
    return Cohort(persons=persons, others=others, parent_links=links)


def load_histories(
    spells_path: Path,
    persons_path: Path,
    jobs_path: Optional[Path] = None,
    events_path: Optional[Path] = None,
) -> List[PersonHistory]:
    """Cohort members only, in persons.csv first-seen order."""
    return load_cohort(spells_path, persons_path, jobs_path, events_path).persons
