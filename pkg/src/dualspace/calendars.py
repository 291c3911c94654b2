"""Trading-day calendars and calendar-month grouping helpers."""

from __future__ import annotations

import datetime as dt


def trading_days(start: dt.date, n_days: int) -> list[dt.date]:
    """First `n_days` weekdays on or after `start` (no holiday calendar)."""
    days = []
    day = start
    while len(days) < n_days:
        if day.weekday() < 5:
            days.append(day)
        day += dt.timedelta(days=1)
    return days


def month_key(day: dt.date) -> str:
    return f"{day.year:04d}-{day.month:02d}"


def month_first(key: str) -> dt.date:
    year, month = key.split("-")
    return dt.date(int(year), int(month), 1)


def month_range(first: dt.date, last: dt.date) -> list[str]:
    """Contiguous list of month keys from first's month through last's."""
    keys = []
    year, month = first.year, first.month
    while (year, month) <= (last.year, last.month):
        keys.append(f"{year:04d}-{month:02d}")
        month += 1
        if month == 13:
            month, year = 1, year + 1
    return keys


def group_by_month(days: list[dt.date]) -> dict[str, list[int]]:
    """Map month key -> positions of that month's days (order preserved)."""
    groups: dict[str, list[int]] = {}
    for i, day in enumerate(days):
        groups.setdefault(month_key(day), []).append(i)
    return groups
