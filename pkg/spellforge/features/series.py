"""Daily and fortnightly series over an observation window."""

from datetime import date, timedelta
from typing import Iterable, Tuple

import numpy as np

from spellforge.core.history import (
    LATEST_DATE,
    FilterSpec,
    ObservationWindow,
    PersonHistory,
    day_count,
)
from spellforge.core.taxonomy import ANY_PAYMENT, PaymentFilter

FORTNIGHT = 14
QUANTITIES = ("benefit-amount", "employment-income", "employment-hours", "rent")


def _spread(daily: np.ndarray, w: ObservationWindow, start, end, per_fortnight: float):
    span = w.clip(start, end)
    if span is not None:
        daily[span[0] : span[1] + 1] += per_fortnight / FORTNIGHT


def rent_steps(history: PersonHistory) -> Iterable[Tuple[date, date, float]]:
    """Rent in effect from each rent event until the next one (or the end of records)."""
    events = [e for e in history.events if e.kind == "rent" and e.value not in (None, "")]
    for i, event in enumerate(events):
        until = events[i + 1].day if i + 1 < len(events) else None
        end = LATEST_DATE if until is None else until - timedelta(days=1)
        if end >= event.day:
            yield event.day, end, float(event.value)


def daily_series(
    h: PersonHistory,
    w: ObservationWindow,
    quantity: str,
    spell_filter: FilterSpec = ANY_PAYMENT,
) -> np.ndarray:
    """Per-day amounts; fortnightly figures are spread evenly over their days."""
    daily = np.zeros(day_count(w), dtype=float)
    if quantity == "benefit-amount":
        accepts = PaymentFilter.parse(spell_filter).accepts
        for spell in h.spells:
            if spell.amount is not None and accepts(spell.category):
                _spread(daily, w, spell.start, spell.end, spell.amount)
    elif quantity == "employment-income":
        for job in h.jobs:
            _spread(daily, w, job.start, job.end, job.income)
    elif quantity == "employment-hours":
        for job in h.jobs:
            _spread(daily, w, job.start, job.end, job.hours)
    elif quantity == "rent":
        for start, end, amount in rent_steps(h):
            _spread(daily, w, start, end, amount)
    else:
        raise ValueError(f"unknown quantity {quantity!r}; expected one of {QUANTITIES}")
    return daily


def bin_edges(w: ObservationWindow) -> np.ndarray:
    """Start offsets of the 14-day bins; the last bin may be short."""
    return np.arange(0, day_count(w), FORTNIGHT)


def to_fortnights(daily: np.ndarray) -> np.ndarray:
    if daily.size == 0:
        return daily
    return np.add.reduceat(daily, np.arange(0, daily.size, FORTNIGHT))


def biweekly_series(
    h: PersonHistory,
    w: ObservationWindow,
    quantity: str,
    spell_filter: FilterSpec = ANY_PAYMENT,
) -> np.ndarray:
    """Per-fortnight totals, bins anchored at ``w.first_day``."""
    return to_fortnights(daily_series(h, w, quantity, spell_filter))


def fluctuation(series) -> Tuple[float, bool]:
    """Sample standard deviation; ``(0.0, True)`` when fewer than two bins."""
    values = np.asarray(series, dtype=float)
    if values.size < 2:
        return 0.0, True
    return float(np.std(values, ddof=1)), False
