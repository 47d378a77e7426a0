"""Date-indexed daily series: per-day means, standardization, market
calendar filling and period splits."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import IO, Iterable, Sequence

import numpy as np

from sentibreak.errors import DataError
from sentibreak.ingest import MarketQuote, _decode

ONE_DAY = timedelta(days=1)


@dataclass(frozen=True, eq=False)
class DailySeries:
    start_date: date
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise DataError("a daily series needs at least one value")
        if not np.all(np.isfinite(vals)):
            raise DataError(f"series {self.label!r} has non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end_date(self) -> date:
        return self.start_date + (len(self) - 1) * ONE_DAY

    @property
    def dates(self) -> list[date]:
        return [self.start_date + i * ONE_DAY for i in range(len(self))]

    def index_of(self, d: date) -> int:
        """0-based position of ``d``; raises if outside the series."""
        i = (d - self.start_date).days
        if not 0 <= i < len(self):
            raise DataError(f"{d} outside series {self.label!r} ({self.start_date}..{self.end_date})")
        return i

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "value"])
        for d, v in zip(self.dates, self.values):
            w.writerow([d.isoformat(), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, stream: IO[bytes] | bytes, label: str = "") -> "DailySeries":
        rows = list(csv.reader(io.StringIO(_decode(stream), newline="")))
        if not rows or [c.strip() for c in rows[0]] != ["date", "value"]:
            raise DataError("series CSV needs header date,value")
        body = [r for r in rows[1:] if r]
        if not body:
            raise DataError("series CSV has no rows")
        try:
            dates = [date.fromisoformat(r[0]) for r in body]
            values = [float(r[1]) for r in body]
        except (ValueError, IndexError) as exc:
            raise DataError(f"bad series row: {exc}") from exc
        for prev, cur in zip(dates, dates[1:]):
            if cur - prev != ONE_DAY:
                raise DataError(f"series CSV not consecutive at {prev} -> {cur}")
        return cls(dates[0], np.array(values), label)


def date_range(start: date, end: date) -> list[date]:
    if end < start:
        raise DataError(f"empty date range {start}..{end}")
    return [start + i * ONE_DAY for i in range((end - start).days + 1)]


def utc_date(ts: datetime) -> date:
    if ts.tzinfo is None:
        return ts.date()
    return ts.astimezone(timezone.utc).date()


def daily_mean(
    scored: Iterable[tuple[datetime, float]],
    start: date,
    end: date,
    label: str = "",
    fill: str = "error",
) -> DailySeries:
    """Mean score per UTC calendar day over ``start..end`` inclusive.

    Scores stamped outside the range are ignored. Days without documents
    raise ``DataError`` under ``fill="error"``; ``fill="linear"``
    interpolates them from the nearest non-empty days (the range ends
    must still have documents).
    """
    days = date_range(start, end)
    buckets: dict[date, list[float]] = defaultdict(list)
    for ts, score in scored:
        d = utc_date(ts)
        if start <= d <= end:
            buckets[d].append(float(score))
    # fsum is exactly rounded, so the mean does not depend on input order
    values = [math.fsum(buckets[d]) / len(buckets[d]) if buckets.get(d) else math.nan for d in days]
    missing = [d for d, v in zip(days, values) if math.isnan(v)]
    if missing:
        if fill != "linear":
            shown = ", ".join(d.isoformat() for d in missing[:10])
            more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
            raise DataError(f"no documents on {shown}{more}")
        values = _fill_linear(np.array(values), label)
    return DailySeries(start, np.array(values), label)


def _fill_linear(values: np.ndarray, label: str) -> np.ndarray:
    known = ~np.isnan(values)
    if not (known[0] and known[-1]):
        raise DataError(f"series {label!r}: cannot fill missing days at the range ends")
    idx = np.arange(values.size)
    return np.interp(idx, idx[known], values[known])


def zscore(series: DailySeries) -> DailySeries:
    if len(series) < 2:
        raise DataError("zscore needs at least 2 values")
    x = series.values
    centered = x - x.mean()
    sd = np.sqrt(np.sum(centered**2) / (x.size - 1))
    if not sd > 0:
        raise DataError(f"zero variance in series {series.label!r}")
    z = centered / sd
    # second pass removes the rounding residue left by the first
    z = z - z.mean()
    z = z / np.sqrt(np.sum(z**2) / (z.size - 1))
    return DailySeries(series.start_date, z, series.label)


def interpolate_calendar(
    quotes: Sequence[MarketQuote], start: date, end: date, label: str = "market"
) -> DailySeries:
    """Daily closes over ``start..end``, linear between quoted days."""
    by_date = {q.date: q.close for q in quotes}
    if start not in by_date or end not in by_date:
        missing = start if start not in by_date else end
        raise DataError(f"no anchor quote on {missing}")
    days = date_range(start, end)
    anchors = [i for i, d in enumerate(days) if d in by_date]
    anchor_vals = [by_date[days[i]] for i in anchors]
    values = np.empty(len(days))
    for (i0, v0), (i1, v1) in zip(zip(anchors, anchor_vals), zip(anchors[1:], anchor_vals[1:])):
        span = i1 - i0
        lo, hi = min(v0, v1), max(v0, v1)
        for j in range(i0, i1):
            frac = (j - i0) / span
            values[j] = min(hi, max(lo, v0 + (v1 - v0) * frac))
    values[anchors[-1]] = anchor_vals[-1]
    return DailySeries(start, values, label)


@dataclass(frozen=True)
class PeriodSplit:
    period_a: DailySeries
    period_b: DailySeries
    break_date: date


def split_periods(series: DailySeries, break_date: date) -> PeriodSplit:
    """Days before ``break_date`` go to A, the rest (inclusive) to B."""
    if not series.start_date < break_date <= series.end_date:
        raise DataError(
            f"break date {break_date} must fall after {series.start_date} and on or before {series.end_date}"
        )
    k = (break_date - series.start_date).days
    a = DailySeries(series.start_date, series.values[:k], series.label)
    b = DailySeries(break_date, series.values[k:], series.label)
    return PeriodSplit(a, b, break_date)
