"""Lexicon scoring: unigram valence sums, emotion counts and a
valence-shifted sentence polarity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import IO, Mapping, Sequence

from sentibreak.errors import DataError
from sentibreak.ingest import _decode

EMOTIONS = ("anger", "disgust", "fear", "sadness", "anticipation", "joy", "surprise", "trust")
LABELS = EMOTIONS + ("positive", "negative")
DEFAULT_WINDOW = 4
MIN_AMPLIFICATION = 0.1


def _check_key(tok: str) -> None:
    if not tok or tok != tok.lower() or any(c.isspace() for c in tok):
        raise DataError(f"lexicon key must be a lowercase token: {tok!r}")


@dataclass(frozen=True)
class ValenceLexicon:
    name: str
    entries: Mapping[str, float]

    def __post_init__(self):
        if not self.entries:
            raise DataError(f"lexicon {self.name!r} is empty")
        for tok, v in self.entries.items():
            _check_key(tok)
            if not math.isfinite(v):
                raise DataError(f"non-finite valence for {tok!r} in {self.name!r}")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def negated(self) -> "ValenceLexicon":
        return ValenceLexicon(self.name, {t: -v for t, v in self.entries.items()})

    @classmethod
    def load(cls, name: str, stream: IO[bytes] | bytes) -> "ValenceLexicon":
        """Read ``token<TAB>score`` rows; blank lines and ``#`` comments ignored."""
        entries: dict[str, float] = {}
        for lineno, line in enumerate(_decode(stream).splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) != 2:
                raise DataError(f"{name}: line {lineno}: expected token<TAB>score")
            try:
                entries[parts[0].strip()] = float(parts[1])
            except ValueError as exc:
                raise DataError(f"{name}: line {lineno}: bad score {parts[1]!r}") from exc
        return cls(name, entries)


@dataclass(frozen=True)
class EmotionLexicon:
    name: str
    entries: Mapping[str, frozenset[str]]

    def __post_init__(self):
        clean = {}
        for tok, labels in self.entries.items():
            _check_key(tok)
            labels = frozenset(labels)
            if not labels:
                raise DataError(f"empty label set for {tok!r}")
            unknown = labels - set(LABELS)
            if unknown:
                raise DataError(f"unknown emotion labels {sorted(unknown)} for {tok!r}")
            clean[tok] = labels
        object.__setattr__(self, "entries", MappingProxyType(clean))

    def swapped_polarity(self) -> "EmotionLexicon":
        flip = {"positive": "negative", "negative": "positive"}
        return EmotionLexicon(
            self.name, {t: frozenset(flip.get(l, l) for l in ls) for t, ls in self.entries.items()}
        )

    @classmethod
    def load(cls, name: str, stream: IO[bytes] | bytes) -> "EmotionLexicon":
        """Read ``token<TAB>label`` rows, one per token-label pair."""
        entries: dict[str, set[str]] = {}
        for lineno, line in enumerate(_decode(stream).splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) != 2:
                raise DataError(f"{name}: line {lineno}: expected token<TAB>label")
            entries.setdefault(parts[0].strip(), set()).add(parts[1].strip())
        return cls(name, {t: frozenset(ls) for t, ls in entries.items()})


@dataclass(frozen=True)
class ShifterLexicon:
    negators: frozenset[str] = frozenset()
    amplifiers: Mapping[str, float] = field(default_factory=dict)
    deamplifiers: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        neg, amp, deamp = set(self.negators), set(self.amplifiers), set(self.deamplifiers)
        if neg & amp or neg & deamp or amp & deamp:
            raise DataError("shifter roles overlap: " + ", ".join(sorted((neg & amp) | (neg & deamp) | (amp & deamp))))
        for tok in neg | amp | deamp:
            _check_key(tok)
        for tok, w in {**self.amplifiers, **self.deamplifiers}.items():
            if not 0 < w <= 1:
                raise DataError(f"shifter weight for {tok!r} outside (0, 1]: {w}")
        object.__setattr__(self, "negators", frozenset(self.negators))
        object.__setattr__(self, "amplifiers", MappingProxyType(dict(self.amplifiers)))
        object.__setattr__(self, "deamplifiers", MappingProxyType(dict(self.deamplifiers)))

    @classmethod
    def load(cls, stream: IO[bytes] | bytes) -> "ShifterLexicon":
        """Read ``token<TAB>role<TAB>weight`` rows (weight ignored for negators)."""
        neg: set[str] = set()
        amp: dict[str, float] = {}
        deamp: dict[str, float] = {}
        for lineno, line in enumerate(_decode(stream).splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) not in (2, 3):
                raise DataError(f"shifters: line {lineno}: expected token<TAB>role<TAB>weight")
            tok, role = parts[0].strip(), parts[1].strip()
            try:
                weight = float(parts[2]) if len(parts) == 3 and parts[2].strip() else 1.0
            except ValueError as exc:
                raise DataError(f"shifters: line {lineno}: bad weight") from exc
            if role == "negator":
                neg.add(tok)
            elif role == "amplifier":
                amp[tok] = weight
            elif role == "deamplifier":
                deamp[tok] = weight
            else:
                raise DataError(f"shifters: line {lineno}: unknown role {role!r}")
        return cls(frozenset(neg), amp, deamp)


EMPTY_SHIFTERS = ShifterLexicon()


def score_unigram(tokens: Sequence[str], lex: ValenceLexicon) -> float:
    entries = lex.entries
    return float(sum(entries.get(t, 0.0) for t in tokens))


def score_emotions(tokens: Sequence[str], lex: EmotionLexicon) -> dict[str, int]:
    """Count, for each of the ten labels, the tokens that carry it."""
    counts = dict.fromkeys(LABELS, 0)
    entries = lex.entries
    for t in tokens:
        for label in entries.get(t, ()):
            counts[label] += 1
    return counts


def score_shifted(
    sentence_tokens: Sequence[str],
    lex: ValenceLexicon,
    shifters: ShifterLexicon = EMPTY_SHIFTERS,
    window: int = DEFAULT_WINDOW,
) -> float:
    """Polarity of one sentence with negation and (de)amplification.

    Each polarized token's valence is flipped once per negator and scaled
    by ``max(0.1, 1 + amplifier weights - deamplifier weights)``, looking
    at up to ``window`` preceding tokens. The sum is divided by the square
    root of the sentence length. A token with a valence is never treated
    as a shifter.
    """
    if window < 0:
        raise DataError("window must be >= 0")
    n = len(sentence_tokens)
    if n == 0:
        return 0.0
    entries = lex.entries
    total = 0.0
    for i, tok in enumerate(sentence_tokens):
        v = entries.get(tok)
        if v is None:
            continue
        negations = 0
        amp = deamp = 0.0
        for ctx in sentence_tokens[max(0, i - window) : i]:
            if ctx in entries:
                continue
            if ctx in shifters.negators:
                negations += 1
            elif ctx in shifters.amplifiers:
                amp += shifters.amplifiers[ctx]
            elif ctx in shifters.deamplifiers:
                deamp += shifters.deamplifiers[ctx]
        sign = -1.0 if negations % 2 else 1.0
        total += v * sign * max(MIN_AMPLIFICATION, 1.0 + amp - deamp)
    return total / math.sqrt(n)


@dataclass(frozen=True)
class Scorer:
    """A named scoring method: one lexicon under one mode.

    ``emotion`` mode scores a document as its positive minus negative
    label count.
    """

    name: str
    mode: str
    lexicon: ValenceLexicon | EmotionLexicon
    shifters: ShifterLexicon = EMPTY_SHIFTERS
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        expected = EmotionLexicon if self.mode == "emotion" else ValenceLexicon
        if self.mode not in ("unigram", "emotion", "shifted"):
            raise DataError(f"unknown scoring mode {self.mode!r}")
        if not isinstance(self.lexicon, expected):
            raise DataError(f"mode {self.mode!r} needs a {expected.__name__}")

    def __call__(self, tokens: Sequence[str]) -> float:
        if self.mode == "unigram":
            return score_unigram(tokens, self.lexicon)
        if self.mode == "shifted":
            return score_shifted(tokens, self.lexicon, self.shifters, self.window)
        counts = score_emotions(tokens, self.lexicon)
        return float(counts["positive"] - counts["negative"])
