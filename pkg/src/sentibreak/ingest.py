"""Reading tweet and market files, text cleaning and tokenization."""

from __future__ import annotations

import csv
import io
import json
import logging
import unicodedata
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import IO, Iterable

from sentibreak.errors import DataError

logger = logging.getLogger(__name__)

URL_PREFIXES = ("http://", "https://", "www.")
DROP_PREFIXES = URL_PREFIXES + ("@", "#")


@dataclass
class TweetRecord:
    id: str
    created_at: datetime
    raw_text: str
    clean_text: str = ""
    tokens: list[str] = field(default_factory=list)

    def prepare(self) -> "TweetRecord":
        """Fill ``clean_text`` and ``tokens`` from ``raw_text`` in place."""
        self.clean_text = clean_text(self.raw_text)
        self.tokens = tokenize(self.clean_text)
        return self


@dataclass(frozen=True)
class MarketQuote:
    date: date
    close: float


@dataclass(frozen=True)
class StopList:
    words: frozenset[str]

    def __post_init__(self):
        for w in self.words:
            if not w or w != w.lower() or any(c.isspace() for c in w):
                raise DataError(f"invalid stop word {w!r}")

    def __contains__(self, token: str) -> bool:
        return token in self.words

    @classmethod
    def load(cls, stream: IO[bytes]) -> "StopList":
        text = _decode(stream)
        words = {line.strip().lower() for line in text.splitlines()}
        return cls(frozenset(w for w in words if w))


def _is_punct(ch: str) -> bool:
    # Unicode punctuation and symbol categories; covers string.punctuation.
    return unicodedata.category(ch)[0] in "PS"


def clean_text(raw: str) -> str:
    """Lowercase, drop URL/mention/hashtag tokens whole, blank out punctuation.

    >>> clean_text("Lockdown in #Italy!! @user https://t.co/x")
    'lockdown in'
    """
    kept = [t for t in raw.lower().split() if not t.startswith(DROP_PREFIXES)]
    text = "".join(" " if _is_punct(c) else c for c in " ".join(kept))
    # a handful of code points stay cased after lower(); drop them rather
    # than leak uppercase into tokens
    text = "".join(c for c in text if not c.isupper())
    return " ".join(text.split())


def tokenize(clean: str) -> list[str]:
    return clean.split()


def remove_stopwords(
    tokens: Iterable[str], stops: StopList | frozenset[str] | set[str], drop_numbers: bool = False
) -> list[str]:
    words = stops.words if isinstance(stops, StopList) else stops
    out = []
    for tok in tokens:
        if tok in words:
            continue
        if drop_numbers and tok.isdigit():
            continue
        out.append(tok)
    return out


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 instant; naive values are taken as UTC."""
    s = value.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    ts = datetime.fromisoformat(s)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _decode(stream: IO[bytes] | bytes) -> str:
    try:
        data = stream if isinstance(stream, bytes) else stream.read()
        if isinstance(data, str):
            return data
        return data.decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"unreadable stream: {exc}") from exc


def _record_from_fields(fields: dict) -> TweetRecord:
    rid, created, text = fields["id"], fields["created_at"], fields["text"]
    if not isinstance(rid, (str, int)) or not isinstance(text, str) or not isinstance(created, str):
        raise ValueError("bad field types")
    return TweetRecord(id=str(rid), created_at=parse_timestamp(created), raw_text=text)


def parse_tweets(stream: IO[bytes] | bytes, format: str = "jsonl") -> tuple[list[TweetRecord], int]:
    """Parse a tweet file into records, in input order.

    Malformed lines (bad JSON, missing fields, unparsable timestamps) are
    skipped with a warning. Returns ``(records, n_skipped)``. Records come
    back with ``clean_text``/``tokens`` unset; call ``prepare()``.
    """
    text = _decode(stream)
    records: list[TweetRecord] = []
    skipped = 0
    if format == "jsonl":
        # JSON Lines separates records on "\n" only; str.splitlines would
        # also break on U+2028 and friends, which may appear inside strings.
        for lineno, line in enumerate(text.split("\n"), 1):
            line = line.removesuffix("\r")
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("not an object")
                records.append(_record_from_fields(obj))
            except (ValueError, KeyError, TypeError) as exc:
                skipped += 1
                logger.warning("skipping malformed line %d: %s", lineno, exc)
    elif format == "csv":
        reader = csv.DictReader(io.StringIO(text, newline=""))
        if reader.fieldnames is None or not {"id", "created_at", "text"} <= set(reader.fieldnames):
            raise DataError("tweet CSV needs header id,created_at,text")
        for row in reader:
            try:
                if None in row.values() or None in row:
                    raise ValueError("wrong column count")
                records.append(_record_from_fields(row))
            except (ValueError, KeyError, TypeError) as exc:
                skipped += 1
                logger.warning("skipping malformed row %d: %s", reader.line_num, exc)
    else:
        raise DataError(f"unknown tweet format {format!r}")
    if skipped:
        logger.warning("%d malformed tweet lines skipped", skipped)
    return records, skipped


def dump_tweets(records: Iterable[TweetRecord], format: str = "jsonl") -> str:
    if format == "jsonl":
        return "".join(
            json.dumps(
                {"id": r.id, "created_at": format_timestamp(r.created_at), "text": r.raw_text},
                ensure_ascii=False,
            )
            + "\n"
            for r in records
        )
    if format == "csv":
        buf = io.StringIO(newline="")
        # quote everything: minimal quoting leaves a bare "\r" unprotected
        w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_ALL)
        w.writerow(["id", "created_at", "text"])
        for r in records:
            if "\x00" in r.id or "\x00" in r.raw_text:
                raise DataError(f"record {r.id!r}: NUL characters cannot be written as CSV")
            w.writerow([r.id, format_timestamp(r.created_at), r.raw_text])
        return buf.getvalue()
    raise DataError(f"unknown tweet format {format!r}")


def parse_market(stream: IO[bytes] | bytes) -> list[MarketQuote]:
    text = _decode(stream)
    reader = csv.reader(io.StringIO(text, newline=""))
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if rows and [c.strip().lower() for c in rows[0]] == ["date", "close"]:
        rows = rows[1:]
    seen: dict[date, MarketQuote] = {}
    for row in rows:
        if len(row) != 2:
            raise DataError(f"market row needs 2 columns: {row!r}")
        try:
            d = date.fromisoformat(row[0].strip())
        except ValueError as exc:
            raise DataError(f"unparsable date {row[0]!r}") from exc
        try:
            close = float(row[1])
        except ValueError as exc:
            raise DataError(f"unparsable close {row[1]!r}") from exc
        if not close > 0 or close == float("inf"):
            raise DataError(f"non-positive close on {d}: {row[1]}")
        if d in seen:
            raise DataError(f"duplicate date {d}")
        seen[d] = MarketQuote(d, close)
    return sorted(seen.values(), key=lambda q: q.date)
