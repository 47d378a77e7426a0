"""Seeded synthetic data with known regime structure.

All randomness comes from :class:`sentibreak.rng.PortableRng`.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from typing import Sequence

import numpy as np

from sentibreak.errors import DataError
from sentibreak.ingest import TweetRecord
from sentibreak.rng import PortableRng
from sentibreak.sentiment import ValenceLexicon
from sentibreak.series import DailySeries

DEFAULT_START = date(2019, 10, 1)

FILLER_WORDS = (
    "italy", "rome", "milan", "news", "today", "people", "city", "week", "government",
    "travel", "football", "food", "trip", "report", "update", "pasta", "venice",
)


@dataclass(frozen=True)
class RegimeSchedule:
    """Piecewise-constant means. ``break_indices`` are 1-based last days of
    each regime except the final one."""

    segment_means: Sequence[float]
    break_indices: Sequence[int]
    noise_sd: float = 0.0
    seed: int = 0

    def validate(self, n: int) -> None:
        if len(self.segment_means) != len(self.break_indices) + 1:
            raise DataError("need exactly one more segment mean than break index")
        if self.noise_sd < 0:
            raise DataError("noise_sd must be >= 0")
        prev = 0
        for b in self.break_indices:
            if not prev < b < n:
                raise DataError(f"break indices must be increasing and interior to 1..{n}: {list(self.break_indices)}")
            prev = b

    def means(self, n: int) -> np.ndarray:
        self.validate(n)
        out = np.empty(n)
        edges = [0, *self.break_indices, n]
        for mean, a, b in zip(self.segment_means, edges, edges[1:]):
            out[a:b] = mean
        return out


def gen_step_series(
    n: int, schedule: RegimeSchedule, start_date: date = DEFAULT_START, label: str = "synthetic"
) -> DailySeries:
    if n < 1:
        raise DataError("n must be >= 1")
    values = schedule.means(n)
    if schedule.noise_sd > 0:
        values = values + schedule.noise_sd * PortableRng(schedule.seed).normal(n)
    return DailySeries(start_date, values, label)


def gen_corpus(
    n_days: int,
    schedule: RegimeSchedule,
    lex: ValenceLexicon,
    docs_per_day: int,
    start_date: date = DEFAULT_START,
    polar_per_doc: int = 3,
    filler_per_doc: int = 5,
    decorate: bool = True,
) -> list[TweetRecord]:
    """Documents whose expected unigram score equals each day's target.

    The day target is the schedule's step series (including its noise).
    Each document holds ``polar_per_doc`` lexicon words, each positive
    with probability p and otherwise negative (uniform within polarity),
    where p solves ``polar_per_doc * (p vpos + (1 - p) vneg) = target``
    for the mean positive/negative valences. Filler words come from a
    fixed list absent from the lexicon. With ``decorate``, some documents
    get a hashtag, mention or link that cleaning removes.
    """
    if docs_per_day < 1:
        raise DataError("docs_per_day must be >= 1")
    if polar_per_doc < 1:
        raise DataError("polar_per_doc must be >= 1")
    pos = sorted(t for t, v in lex.entries.items() if v > 0)
    neg = sorted(t for t, v in lex.entries.items() if v < 0)
    if not pos or not neg:
        raise DataError(f"lexicon {lex.name!r} needs both positive and negative entries")
    vpos = float(np.mean([lex.entries[t] for t in pos]))
    vneg = float(np.mean([lex.entries[t] for t in neg]))
    fillers = [w for w in dict.fromkeys(FILLER_WORDS) if w not in lex.entries]
    if not fillers:
        raise DataError("every filler word is in the lexicon")

    targets = gen_step_series(n_days, schedule, start_date).values
    p_pos = (targets / polar_per_doc - vneg) / (vpos - vneg)
    bad = np.flatnonzero((p_pos < 0) | (p_pos > 1))
    if bad.size:
        lo, hi = polar_per_doc * vneg, polar_per_doc * vpos
        raise DataError(f"day target {targets[bad[0]]:.3f} outside attainable range [{lo:.3f}, {hi:.3f}]")

    # one stream per purpose, derived from the schedule seed
    rng = PortableRng(schedule.seed ^ 0x5EED_C0A9)
    records = []
    width = polar_per_doc + filler_per_doc
    step = 86400 // docs_per_day
    for day in range(n_days):
        d0 = datetime.combine(start_date + timedelta(days=day), time(0), timezone.utc)
        is_pos = rng.uniform(docs_per_day * polar_per_doc).reshape(docs_per_day, polar_per_doc) < p_pos[day]
        pick_pos = rng.integers(len(pos), docs_per_day * polar_per_doc).reshape(docs_per_day, polar_per_doc)
        pick_neg = rng.integers(len(neg), docs_per_day * polar_per_doc).reshape(docs_per_day, polar_per_doc)
        pick_fill = rng.integers(len(fillers), docs_per_day * max(filler_per_doc, 1)).reshape(docs_per_day, -1)
        order = np.argsort(rng.uniform(docs_per_day * width).reshape(docs_per_day, width), axis=1, kind="stable")
        extra = rng.integers(10, docs_per_day)
        for j in range(docs_per_day):
            words = [pos[pick_pos[j, s]] if is_pos[j, s] else neg[pick_neg[j, s]] for s in range(polar_per_doc)]
            words += [fillers[pick_fill[j, s]] for s in range(filler_per_doc)]
            words = [words[k] for k in order[j]]
            if decorate:
                if extra[j] == 0:
                    words.append("#Italy")
                elif extra[j] == 1:
                    words.insert(0, "@user")
                elif extra[j] == 2:
                    words.append("https://t.co/x")
                if j % 7 == 0:
                    words[0] = words[0].capitalize()
            records.append(
                TweetRecord(f"syn-{day:05d}-{j:05d}", d0 + timedelta(seconds=j * step), " ".join(words))
            )
    return records
