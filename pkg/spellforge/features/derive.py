"""Per-person derivation of catalog entries.

Each family has a handler returning one value per column of the entry, or
``None`` when the value is missing for this person. Missingness is data and is
never raised as an error.
"""

from calendar import monthrange
from datetime import date
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from spellforge.core.history import (
    REFERENCE_DATE,
    ObservationWindow,
    PersonHistory,
    coverage_mask,
)
from spellforge.core.taxonomy import ANY_IS, ANY_PAYMENT, PaymentFilter
from spellforge.features.catalog import CatalogEntry, Family
from spellforge.features.series import daily_series, fluctuation, to_fortnights

HOURS_CAP_ANNUAL = 5200.0
HOURS_CAP_FORTNIGHT = 200.0
MINIMUM_WAGE = 16.87
SUBSTANTIAL_GAP_DAYS = 28
HOURS_CHANGE_THRESHOLD = 20.0

SINGLE_STATUSES = frozenset({"single", "separated", "divorced", "widowed"})
PARTNERED_STATUSES = frozenset({"partnered", "married", "defacto"})
PARENT_ROLES = ("father", "mother", "parent")

Values = Optional[List[float]]


@lru_cache(maxsize=64)
def _window(spec: str) -> ObservationWindow:
    return ObservationWindow.parse(spec)


@lru_cache(maxsize=256)
def _filter(spec) -> PaymentFilter:
    return PaymentFilter.parse(list(spec) if isinstance(spec, tuple) else spec)


def _filter_param(params: Mapping, default: PaymentFilter) -> PaymentFilter:
    spec = params.get("filter")
    if spec is None:
        return default
    return _filter(tuple(spec) if isinstance(spec, list) else spec)


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Inclusive ``(start, end)`` offsets of consecutive True runs."""
    if not mask.any():
        return []
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def _status_class(status: Optional[str]) -> Optional[str]:
    if status in SINGLE_STATUSES:
        return "single"
    if status in PARTNERED_STATUSES:
        return "partnered"
    return None


class PersonFrame:
    """One person's history with memoized coverage masks and series."""

    def __init__(
        self,
        history: PersonHistory,
        parents: Optional[Mapping[str, Optional[Sequence[PersonHistory]]]] = None,
    ):
        self.history = history
        self._parents = parents or {}
        self._parent_frames: Dict[str, Optional[List["PersonFrame"]]] = {}
        self._coverage: Dict[Tuple, np.ndarray] = {}
        self._daily: Dict[Tuple, np.ndarray] = {}
        self._age: Optional[int] = None
        self._age_known = False

    def parent_frames(self, role: str) -> Optional[List["PersonFrame"]]:
        if role not in self._parent_frames:
            parents = self._parents.get(role)
            self._parent_frames[role] = (
                [PersonFrame(p) for p in parents] if parents else None
            )
        return self._parent_frames[role]

    def coverage(self, w: ObservationWindow, spell_filter: PaymentFilter) -> np.ndarray:
        key = (w, spell_filter)
        if key not in self._coverage:
            self._coverage[key] = coverage_mask(self.history.spells, w, spell_filter)
        return self._coverage[key]

    def daily(self, w: ObservationWindow, quantity: str, spell_filter=ANY_PAYMENT) -> np.ndarray:
        key = (w, quantity, spell_filter)
        if key not in self._daily:
            self._daily[key] = daily_series(self.history, w, quantity, spell_filter)
        return self._daily[key]

    def fortnights(self, w: ObservationWindow, quantity: str, spell_filter=ANY_PAYMENT):
        return to_fortnights(self.daily(w, quantity, spell_filter))

    def job_counts(self, w: ObservationWindow) -> np.ndarray:
        """Number of jobs held on each day of the window."""
        counts = np.zeros(w.days, dtype=int)
        for job in self.history.jobs:
            span = w.clip(job.start, job.end)
            if span is not None:
                counts[span[0] : span[1] + 1] += 1
        return counts

    def age(self) -> Optional[int]:
        if not self._age_known:
            self._age = self.history.age_on(REFERENCE_DATE)
            self._age_known = True
        return self._age

    def events(self, w: ObservationWindow, kind: str):
        return [e for e in self.history.events if e.kind == kind and w.contains(e.day)]

    def statuses(self, w: ObservationWindow) -> List[Tuple[date, Optional[str]]]:
        """Relationship status timeline: status in force at ``w.first_day``, then changes."""
        current = self.history.attribute("marital_status")
        known_from = date.min if current is not None else None
        timeline: List[Tuple[date, Optional[str]]] = []
        for event in self.history.events:
            if event.kind != "relationship":
                continue
            if event.day <= w.first_day:
                current = event.value
                known_from = event.day
            elif event.day <= w.last_day:
                timeline.append((event.day, event.value))
        head = [(w.first_day, current)] if known_from is not None else []
        return head + timeline


# measures shared by ever-indicator, duration and count entries


def _measure_coverage(frame: PersonFrame, w, params) -> float:
    return float(frame.coverage(w, _filter_param(params, ANY_IS)).sum())


def _measure_episodes(frame: PersonFrame, w, params) -> float:
    return float(len(_runs(frame.coverage(w, _filter_param(params, ANY_IS)))))


def _measure_transfers(frame: PersonFrame, w, params) -> float:
    accepts = _filter_param(params, ANY_IS).accepts
    spells = sorted(
        (s for s in frame.history.spells if accepts(s.category) and w.clip(s.start, s.end)),
        key=lambda s: (s.start, s.end),
    )
    return float(sum(a.category.code != b.category.code for a, b in zip(spells, spells[1:])))


def _measure_events(frame: PersonFrame, w, params) -> float:
    events = frame.events(w, params["event"])
    values = params.get("values")
    if values is not None:
        events = [e for e in events if e.value in values]
    return float(len(events))


def _measure_status(frame: PersonFrame, w, params) -> float:
    values = set(params["values"])
    return float(sum(status in values for _, status in frame.statuses(w)))


def _measure_status_changes(frame: PersonFrame, w, params) -> float:
    timeline = frame.statuses(w)
    classes = [_status_class(status) for _, status in timeline]
    return float(
        sum(a is not None and b is not None and a != b for a, b in zip(classes, classes[1:]))
    )


def _measure_status_days(frame: PersonFrame, w, params) -> float:
    timeline = frame.statuses(w)
    known = [day for day, status in timeline if status is not None]
    if not known:
        return 0.0
    return float((w.last_day - max(known[0], w.first_day)).days + 1)


def _jobs_in(frame: PersonFrame, w):
    return [j for j in frame.history.jobs if w.clip(j.start, j.end) is not None]


def _measure_jobs(frame: PersonFrame, w, params) -> float:
    return float(len({j.employer_id for j in _jobs_in(frame, w)}))


def _measure_max_simultaneous(frame: PersonFrame, w, params) -> float:
    counts = frame.job_counts(w)
    return float(counts.max()) if counts.size else 0.0


def _measure_substantial_spells(frame: PersonFrame, w, params) -> float:
    gap = int(params.get("gap_days", SUBSTANTIAL_GAP_DAYS))
    runs = _runs(frame.job_counts(w) > 0)
    if not runs:
        return 0.0
    merged = 1
    for (_, prev_end), (start, _) in zip(runs, runs[1:]):
        if start - prev_end - 1 > gap:
            merged += 1
    return float(merged)


def _measure_zero_hour_jobs(frame: PersonFrame, w, params) -> float:
    return float(sum(j.income == 0 and j.hours == 0 for j in _jobs_in(frame, w)))


def _measure_min_wage_jobs(frame: PersonFrame, w, params) -> float:
    floor = float(params.get("min_wage", MINIMUM_WAGE))
    return float(
        sum(j.hours > 0 and j.income / j.hours <= floor for j in _jobs_in(frame, w))
    )


def _hours_changes(frame: PersonFrame, w) -> np.ndarray:
    """Rounded percentage changes between consecutive worked fortnights."""
    hours = np.minimum(frame.fortnights(w, "employment-hours"), HOURS_CAP_FORTNIGHT)
    prev, cur = hours[:-1], hours[1:]
    worked = prev > 0
    return np.rint(100.0 * (cur[worked] - prev[worked]) / prev[worked])


def _measure_hours_changes(frame: PersonFrame, w, params) -> float:
    pct = _hours_changes(frame, w)
    if "low" in params or "high" in params:
        low = float(params.get("low", -np.inf))
        high = float(params.get("high", np.inf))
        return float(np.count_nonzero((pct >= low) & (pct <= high)))
    threshold = float(params.get("threshold", HOURS_CHANGE_THRESHOLD))
    return float(np.count_nonzero(np.abs(pct) > threshold))


def _measure_acquired_variability(frame: PersonFrame, w, params) -> float:
    """1 when a run of stable fortnights is followed by a large change."""
    pct = np.abs(_hours_changes(frame, w))
    threshold = float(params.get("threshold", HOURS_CHANGE_THRESHOLD))
    big = np.flatnonzero(pct > threshold)
    if big.size == 0 or big[0] == 0:
        return 0.0
    return float(np.all(pct[: big[0]] <= 10.0))


def _tenures(frame: PersonFrame, w) -> List[int]:
    by_employer: Dict[str, np.ndarray] = {}
    for job in _jobs_in(frame, w):
        mask = by_employer.setdefault(job.employer_id, np.zeros(w.days, dtype=bool))
        lo, hi = w.clip(job.start, job.end)
        mask[lo : hi + 1] = True
    return [int(m.sum()) for m in by_employer.values()]


def _measure_tenure_mean(frame: PersonFrame, w, params) -> float:
    tenures = _tenures(frame, w)
    return float(np.mean(tenures)) if tenures else 0.0


def _measure_tenure_max(frame: PersonFrame, w, params) -> float:
    tenures = _tenures(frame, w)
    return float(max(tenures)) if tenures else 0.0


MEASURES: Dict[str, Callable[[PersonFrame, ObservationWindow, Mapping], float]] = {
    "coverage": _measure_coverage,
    "episodes": _measure_episodes,
    "transfers": _measure_transfers,
    "events": _measure_events,
    "status": _measure_status,
    "status-changes": _measure_status_changes,
    "status-days": _measure_status_days,
    "jobs": _measure_jobs,
    "max-simultaneous-jobs": _measure_max_simultaneous,
    "substantial-spells": _measure_substantial_spells,
    "zero-hour-jobs": _measure_zero_hour_jobs,
    "min-wage-jobs": _measure_min_wage_jobs,
    "hours-changes": _measure_hours_changes,
    "acquired-variability": _measure_acquired_variability,
    "job-tenure-mean": _measure_tenure_mean,
    "job-tenure-max": _measure_tenure_max,
}


def _measure(frame: PersonFrame, params: Mapping, default: str) -> float:
    name = params.get("measure", default)
    try:
        handler = MEASURES[name]
    except KeyError:
        raise ValueError(f"unknown measure {name!r}") from None
    return handler(frame, _window(str(params.get("window", "2014"))), params)


# family handlers


def _ever_indicator(frame: PersonFrame, params: Mapping) -> Values:
    max_age = params.get("max_age")
    if max_age is not None:
        age = frame.age()
        if age is None:
            return None
        if age > max_age:
            return [0.0]
    hit = _measure(frame, params, "coverage") >= params.get("at_least", 1)
    return [float(hit)]


def _duration(frame: PersonFrame, params: Mapping) -> Values:
    return [_measure(frame, params, "coverage")]


def _count(frame: PersonFrame, params: Mapping) -> Values:
    return [_measure(frame, params, "events")]


def _amount_total(frame: PersonFrame, params: Mapping) -> Values:
    w = _window(str(params.get("window", "2014")))
    daily = frame.daily(w, params["quantity"], _filter_param(params, ANY_PAYMENT))
    statistic = params.get("statistic", "sum")
    if statistic == "sum":
        value = float(daily.sum())
    elif statistic == "min-daily":
        worked = frame.job_counts(w) > 0
        value = float(daily[worked].min()) if worked.any() else 0.0
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    cap = params.get("cap")
    if cap is not None:
        value = top_code(value, "cap-at-5200-hours", cap=float(cap))[0]
    return [value]


def _fluctuation(frame: PersonFrame, params: Mapping) -> Values:
    w = _window(str(params.get("window", "2014")))
    series = frame.fortnights(w, params["quantity"], _filter_param(params, ANY_PAYMENT))
    bin_cap = params.get("bin_cap")
    if bin_cap is not None:
        series = np.minimum(series, float(bin_cap))
    return [fluctuation(series)[0]]


def _seasonality(frame: PersonFrame, params: Mapping) -> Values:
    w = _window(str(params.get("window", "2014")))
    year = w.first_day.year
    index = int(params["index"])
    if params.get("period", "month") == "month":
        months = [index]
    else:
        months = range(3 * index - 2, 3 * index + 1)
    mask = frame.coverage(w, _filter_param(params, ANY_PAYMENT))
    for month in months:
        span = w.clip(date(year, month, 1), date(year, month, monthrange(year, month)[1]))
        if span is not None and mask[span[0] : span[1] + 1].any():
            return [1.0]
    return [0.0]


def _age_band(frame: PersonFrame, params: Mapping) -> Values:
    age = frame.age()
    if age is None:
        return None
    low = params.get("low")
    high = params.get("high")
    inside = (low is None or age >= low) and (high is None or age <= high)
    return [float(inside)]


def _one_hot(frame: PersonFrame, params: Mapping, levels: Optional[List[str]]) -> Values:
    value = frame.history.attribute(params["attribute"])
    if value is None:
        return None
    if levels is not None:
        return [float(value == level) for level in levels]
    if "exclude" in params:
        return [float(value not in params["exclude"])]
    return [float(value in params["values"])]


def _derived_ratio(frame: PersonFrame, params: Mapping) -> Values:
    w = _window(str(params.get("window", "2014")))
    kind = params["kind"]
    if kind == "proportion":
        mask = frame.coverage(w, _filter_param(params, ANY_IS))
        return [float(mask.sum()) / w.days]
    income = float(frame.daily(w, "employment-income").sum())
    if kind == "wage":
        hours = min(float(frame.daily(w, "employment-hours").sum()), HOURS_CAP_ANNUAL)
        return None if hours <= 0 else [income / hours]
    if kind == "mean-daily":
        worked = frame.job_counts(w) > 0
        daily = frame.daily(w, params.get("quantity", "employment-hours"))
        return [float(daily[worked].mean())] if worked.any() else [0.0]
    if kind == "rental-burden":
        rent = float(frame.daily(w, "rent").sum())
        benefits = float(frame.daily(w, "benefit-amount").sum())
        denominator = benefits + income
        return None if denominator <= 0 else [rent / denominator]
    raise ValueError(f"unknown ratio kind {kind!r}")


def _missing_flag(frame: PersonFrame, params: Mapping) -> Values:
    attributes = params.get("attributes") or [params["attribute"]]
    return [float(all(frame.history.attribute(a) is None for a in attributes))]


def _evaluate_self(entry: CatalogEntry, frame: PersonFrame) -> Values:
    params = entry.params
    family = entry.family
    if params.get("requires_is"):
        w = _window(str(params.get("window", "2014")))
        if not frame.coverage(w, ANY_IS).any():
            return None
    if family is Family.EVER_INDICATOR:
        return _ever_indicator(frame, params)
    if family is Family.DURATION:
        return _duration(frame, params)
    if family is Family.COUNT:
        return _count(frame, params)
    if family is Family.AMOUNT_TOTAL:
        return _amount_total(frame, params)
    if family is Family.FLUCTUATION:
        return _fluctuation(frame, params)
    if family is Family.SEASONALITY:
        return _seasonality(frame, params)
    if family is Family.AGE_BAND:
        return _age_band(frame, params)
    if family is Family.CATEGORY_ONE_HOT:
        return _one_hot(frame, params, entry.levels)
    if family is Family.DERIVED_RATIO:
        return _derived_ratio(frame, params)
    if family is Family.MISSING_FLAG:
        return _missing_flag(frame, params)
    raise ValueError(f"{entry.name}: family {family.value} is computed from columns")


def evaluate(entry: CatalogEntry, frame: PersonFrame) -> Values:
    """Values for every column of ``entry``, or None when missing."""
    role = entry.params.get("person", "self")
    if role == "self":
        values = _evaluate_self(entry, frame)
    else:
        parents = frame.parent_frames(role)
        if not parents:
            return None
        found = [v for v in (_evaluate_self(entry, p) for p in parents) if v is not None]
        values = list(np.max(np.asarray(found), axis=0)) if found else None
    return values


def derive_feature(
    entry: CatalogEntry,
    h: PersonHistory,
    parents: Optional[Mapping[str, Optional[Sequence[PersonHistory]]]] = None,
) -> Tuple[Union[float, np.ndarray], bool]:
    """``(value, missing)`` for one person; level-expanded entries return an array."""
    values = evaluate(entry, PersonFrame(h, parents))
    width = len(entry.column_names())
    if values is None:
        return (0.0 if width == 1 else np.zeros(width)), True
    if width == 1:
        return float(values[0]), False
    return np.asarray(values, dtype=float), False


# column-level policies


def apply_missing_policy(values) -> Tuple[np.ndarray, np.ndarray]:
    """Replace missing (None/NaN) with 0 and return the 0/1 indicator."""
    raw = np.array([np.nan if v is None else v for v in values], dtype=float)
    missing = np.isnan(raw)
    return np.where(missing, 0.0, raw), missing.astype(float)


TOP_CODE_RULES = ("cap-at-5200-hours", "flag-99th-percentile-income", "flag-ratio-above-1")


def top_code(
    value: float,
    rule: str,
    threshold: Optional[float] = None,
    cap: float = HOURS_CAP_ANNUAL,
) -> Tuple[float, int]:
    """Apply a top-coding rule to one value.

    Cap rules truncate and flag values at or above the cap. Flag rules keep the
    value; the percentile rule needs ``threshold`` from the sample distribution.
    """
    if rule == "cap-at-5200-hours":
        return (min(value, cap), int(value >= cap))
    if rule == "flag-99th-percentile-income":
        if threshold is None:
            raise ValueError("percentile rule needs the sample threshold")
        return value, int(value >= threshold)
    if rule == "flag-ratio-above-1":
        return value, int(value > 1.0)
    raise ValueError(f"unknown top-code rule {rule!r}")


def top_code_column(
    values: np.ndarray, rule: str, observed: Optional[np.ndarray] = None, cap: float = HOURS_CAP_ANNUAL
) -> np.ndarray:
    """Vectorized flag column; percentiles use only ``observed`` rows."""
    values = np.asarray(values, dtype=float)
    if rule == "cap-at-5200-hours":
        return (values >= cap).astype(float)
    if rule == "flag-99th-percentile-income":
        pool = values if observed is None else values[observed]
        if pool.size == 0:
            return np.zeros_like(values)
        threshold = float(np.quantile(pool, 0.99))
        flags = values >= threshold
        if observed is not None:
            flags &= observed
        return flags.astype(float)
    if rule == "flag-ratio-above-1":
        return (values > 1.0).astype(float)
    raise ValueError(f"unknown top-code rule {rule!r}")
