"""Command implementations behind the CLI.

Every command stages its files in a scratch directory next to the output
directory and moves them into place only after the whole command has
succeeded, so a failed run leaves no partial reports behind.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import shutil
import tempfile
from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from sentibreak import FORMAT_VERSION, __version__
from sentibreak.breaks import SegmentationResult, default_h_min, select_m_bic
from sentibreak.classify import (
    LabeledDoc,
    build_dtm,
    evaluate,
    parse_labeled,
    predict_nb_many,
    predict_svm_many,
    split_train_test,
    train_nb,
    train_svm,
)
from sentibreak.config import PipelineConfig
from sentibreak.errors import ConfigError, DataError
from sentibreak.ingest import (
    StopList,
    TweetRecord,
    clean_text,
    dump_tweets,
    parse_market,
    parse_tweets,
    remove_stopwords,
    tokenize,
)
from sentibreak.rng import PortableRng
from sentibreak.sentiment import LABELS, EmotionLexicon, Scorer, ShifterLexicon, ValenceLexicon, score_emotions
from sentibreak.series import DailySeries, daily_mean, interpolate_calendar, split_periods, zscore
from sentibreak.stats import format_p, lag_sweep, lag_table_csv, mann_whitney
from sentibreak.synthkit import RegimeSchedule, gen_corpus, gen_step_series

logger = logging.getLogger(__name__)

COMMANDS = ("score", "series", "breaks", "lagreg", "periods", "classify", "simulate", "all")


class ReportWriter:
    """Collects output files and publishes them atomically on success."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.files: dict[str, str] = {}

    def write(self, relpath: str, text: str) -> None:
        self.files[relpath] = text

    def write_json(self, relpath: str, obj) -> None:
        self.write(relpath, json.dumps(obj, indent=2, ensure_ascii=False) + "\n")

    def commit(self) -> list[Path]:
        self.out_dir.parent.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=".sentibreak-stage-", dir=self.out_dir.parent))
        try:
            for rel, text in self.files.items():
                p = stage / rel
                p.parent.mkdir(parents=True, exist_ok=True)
                with open(p, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
            written = []
            for rel in self.files:
                dest = self.out_dir / rel
                dest.parent.mkdir(parents=True, exist_ok=True)
                os.replace(stage / rel, dest)
                written.append(dest)
            return written
        finally:
            shutil.rmtree(stage, ignore_errors=True)


# -- loading -----------------------------------------------------------------


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def load_scorers(cfg: PipelineConfig) -> list[Scorer]:
    if not cfg.scorers:
        raise ConfigError("no [[scorers]] configured")
    scorers = []
    for spec in cfg.scorers:
        if spec.mode == "emotion":
            lex = EmotionLexicon.load(spec.name, _read(spec.lexicon))
        else:
            lex = ValenceLexicon.load(spec.name, _read(spec.lexicon))
        shifters = ShifterLexicon.load(_read(spec.shifters)) if spec.shifters else ShifterLexicon()
        scorers.append(Scorer(spec.name, spec.mode, lex, shifters, spec.window))
    return scorers


def load_tweets(cfg: PipelineConfig) -> list[TweetRecord]:
    path = cfg.require_path("inputs", "tweets")
    records, skipped = parse_tweets(_read(path), cfg.get("inputs", "tweets_format"))
    logger.info("%s: %d records, %d malformed lines skipped", path.name, len(records), skipped)
    for r in records:
        r.prepare()
    return records


def emotion_lexicon(cfg: PipelineConfig, scorers: list[Scorer]) -> EmotionLexicon | None:
    path = cfg.path("emotions", "lexicon")
    if path is not None:
        return EmotionLexicon.load("emotions", _read(path))
    for s in scorers:
        if s.mode == "emotion":
            return s.lexicon
    return None


def market_series(cfg: PipelineConfig) -> DailySeries | None:
    path = cfg.path("inputs", "market")
    if path is None:
        return None
    return interpolate_calendar(parse_market(_read(path)), cfg.start, cfg.end, "market")


# -- stages ------------------------------------------------------------------


def score_documents(records: list[TweetRecord], scorers: list[Scorer]) -> dict[str, np.ndarray]:
    return {s.name: np.array([s(r.tokens) for r in records]) for s in scorers}


def sentiment_series(
    cfg: PipelineConfig, records: list[TweetRecord], scores: dict[str, np.ndarray]
) -> dict[str, tuple[DailySeries, DailySeries]]:
    out = {}
    stamps = [r.created_at for r in records]
    for name, vals in scores.items():
        raw = daily_mean(zip(stamps, vals), cfg.start, cfg.end, name, cfg.get("range", "empty_days"))
        out[name] = (raw, zscore(raw))
    return out


def emotion_series(cfg: PipelineConfig, records: list[TweetRecord], lex: EmotionLexicon) -> dict[str, DailySeries]:
    counts = [score_emotions(r.tokens, lex) for r in records]
    stamps = [r.created_at for r in records]
    fill = cfg.get("range", "empty_days")
    return {
        label: daily_mean(((t, c[label]) for t, c in zip(stamps, counts)), cfg.start, cfg.end, label, fill)
        for label in LABELS
    }


def _table_csv(dates: list[date], columns: dict[str, np.ndarray]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", *columns])
    for t, d in enumerate(dates):
        w.writerow([d.isoformat(), *(repr(float(v[t])) for v in columns.values())])
    return buf.getvalue()


def segment(series: DailySeries, cfg: PipelineConfig) -> SegmentationResult:
    n = len(series)
    h = default_h_min(n, cfg.get("breaks", "h_min_fraction"))
    m_max = cfg.get("breaks", "m_max")
    feasible = n // h - 1
    if feasible < 0:
        raise DataError(f"series {series.label!r} of length {n} is shorter than h_min={h}")
    if m_max > feasible:
        logger.warning("%s: m_max %d infeasible with h_min %d, using %d", series.label, m_max, h, feasible)
        m_max = feasible
    return select_m_bic(series.values, m_max, h, series.label)


def write_segmentation(out: ReportWriter, name: str, res: SegmentationResult, start: date) -> None:
    out.write_json(f"breaks/{name}.json", res.to_dict(start))
    out.write(f"breaks/{name}_curve.csv", res.curve_csv())
    out.write(f"breaks/{name}_fit.csv", res.fit_csv(start))


def segmentation_summary(results: dict[str, SegmentationResult], start: date) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "chosen_m", "breakpoints", "break_dates"])
    for name, res in results.items():
        bps = res.chosen.breakpoints
        w.writerow(
            [name, res.chosen_m, " ".join(map(str, bps)), " ".join((start + timedelta(days=b)).isoformat() for b in bps)]
        )
    return buf.getvalue()


def common_break(results: dict[str, SegmentationResult]) -> int:
    """Breakpoint chosen by the most series (earliest on ties)."""
    tally = Counter(b for res in results.values() for b in res.chosen.breakpoints)
    if not tally:
        raise DataError("no series has a break; set periods.break_date explicitly")
    return min(tally, key=lambda b: (-tally[b], b))


def period_tests(
    series: dict[str, DailySeries], break_date: date
) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "n_a", "n_b", "median_a", "median_b", "u_a", "u_b", "p_value", "method", "degenerate"])
    for name, s in series.items():
        split = split_periods(s, break_date)
        a, b = split.period_a.values, split.period_b.values
        res = mann_whitney(a, b)
        w.writerow(
            [
                name, a.size, b.size, repr(float(np.median(a))), repr(float(np.median(b))),
                repr(res.u_a), repr(res.u_b), format_p(res.p_value), res.method, str(res.degenerate).lower(),
            ]
        )
    return buf.getvalue()


def classification_bench(cfg: PipelineConfig) -> dict:
    path = cfg.require_path("inputs", "labeled")
    stop_path = cfg.path("inputs", "stoplist")
    stops = StopList.load(_read(stop_path)) if stop_path else StopList(frozenset())
    docs = [
        LabeledDoc(remove_stopwords(tokenize(clean_text(text)), stops, drop_numbers=True), label, period, rid)
        for rid, period, label, text in parse_labeled(_read(path))
    ]
    c = cfg.raw["classify"]
    runs = {}
    for run in c["runs"]:
        subset = docs if run == "whole" else [d for d in docs if d.period == run]
        if not subset:
            raise DataError(f"classification run {run!r} has no documents")
        train, test = split_train_test(subset, c["ratio"], c["seed"], c["stratify"])
        dtm = build_dtm(train, c["min_df"])
        y_train = [d.label for d in train]
        y_test = [d.label for d in test]
        X_test = dtm.transform(test)
        nb = train_nb(dtm, y_train, c["alpha"])
        svm = train_svm(dtm, y_train, c["c_penalty"], c["epochs"], c["seed"], solver=c["solver"])
        runs[run] = {
            "n_train": len(train),
            "n_test": len(test),
            "vocab_size": len(dtm.vocab),
            "nb": evaluate(predict_nb_many(nb, X_test), y_test).to_dict(),
            "svm": evaluate(predict_svm_many(svm, X_test), y_test).to_dict(),
        }
    return {"format_version": FORMAT_VERSION, "runs": runs}


def _schedule(cfg: PipelineConfig) -> tuple[int, RegimeSchedule, date]:
    sim = cfg.raw.get("simulate")
    if not sim:
        raise ConfigError("no [simulate] section configured")
    try:
        schedule = RegimeSchedule(
            [float(v) for v in sim["segment_means"]],
            [int(v) for v in sim["break_indices"]],
            float(sim.get("noise_sd", 0.0)),
            int(sim.get("seed", 0)),
        )
        n = int(sim["n"])
    except KeyError as exc:
        raise ConfigError(f"simulate.{exc.args[0]} missing") from exc
    start = date.fromisoformat(str(sim.get("start", "2019-10-01")))
    return n, schedule, start


def simulate(cfg: PipelineConfig, out: ReportWriter) -> None:
    n, schedule, start = _schedule(cfg)
    series = gen_step_series(n, schedule, start, "simulated")
    out.write("simulate/step_series.csv", series.to_csv())
    out.write_json(
        "simulate/schedule.json",
        {
            "n": n,
            "start": start.isoformat(),
            "segment_means": list(schedule.segment_means),
            "break_indices": list(schedule.break_indices),
            "noise_sd": schedule.noise_sd,
            "seed": schedule.seed,
        },
    )
    lex_path = cfg.path("simulate", "lexicon")
    if lex_path is not None:
        lex = ValenceLexicon.load(lex_path.stem, _read(lex_path))
        docs = gen_corpus(n, schedule, lex, int(cfg.get("simulate", "docs_per_day", 100)), start)
        out.write("simulate/tweets.jsonl", dump_tweets(docs))


# -- commands ----------------------------------------------------------------


@dataclass
class _Context:
    cfg: PipelineConfig
    scorers: list[Scorer] | None = None
    records: list[TweetRecord] | None = None
    scores: dict | None = None
    sentiment: dict | None = None
    segmentations: dict | None = None

    def ensure_scores(self):
        if self.scores is None:
            self.scorers = load_scorers(self.cfg)
            self.records = load_tweets(self.cfg)
            self.scores = score_documents(self.records, self.scorers)

    def ensure_series(self):
        if self.sentiment is None:
            self.ensure_scores()
            self.sentiment = sentiment_series(self.cfg, self.records, self.scores)

    def ensure_segmentations(self):
        if self.segmentations is None:
            self.ensure_series()
            self.segmentations = {name: segment(z, self.cfg) for name, (_, z) in self.sentiment.items()}


def _cmd_score(ctx: _Context, out: ReportWriter) -> None:
    ctx.ensure_scores()
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    names = list(ctx.scores)
    w.writerow(["id", "created_at", *names])
    for i, r in enumerate(ctx.records):
        w.writerow([r.id, r.created_at.isoformat().replace("+00:00", "Z"), *(repr(float(ctx.scores[n][i])) for n in names)])
    out.write("scores/doc_scores.csv", buf.getvalue())


def _cmd_series(ctx: _Context, out: ReportWriter) -> None:
    ctx.ensure_series()
    for name, (raw, z) in ctx.sentiment.items():
        out.write(f"series/{name}_daily.csv", raw.to_csv())
        out.write(f"series/{name}_zscore.csv", z.to_csv())
    dates = next(iter(ctx.sentiment.values()))[0].dates
    out.write("series/all_zscore.csv", _table_csv(dates, {n: z.values for n, (_, z) in ctx.sentiment.items()}))
    lex = emotion_lexicon(ctx.cfg, ctx.scorers)
    if lex is None:
        logger.info("no emotion lexicon configured; skipping emotion trends")
        return
    emo = emotion_series(ctx.cfg, ctx.records, lex)
    out.write("emotions/emotions_daily.csv", _table_csv(dates, {k: v.values for k, v in emo.items()}))
    standardized = {}
    for k, v in emo.items():
        try:
            standardized[k] = zscore(v).values
        except DataError:
            logger.warning("emotion %r has zero variance; left out of the standardized table", k)
    out.write("emotions/emotions_zscore.csv", _table_csv(dates, standardized))


def _cmd_breaks(ctx: _Context, out: ReportWriter) -> None:
    ctx.ensure_segmentations()
    start = ctx.cfg.start
    results = dict(ctx.segmentations)
    for name, res in ctx.segmentations.items():
        write_segmentation(out, name, res, start)
    market = market_series(ctx.cfg)
    if market is not None:
        res = segment(market, ctx.cfg)
        write_segmentation(out, "market", res, start)
        results["market"] = res
    out.write("breaks/summary.csv", segmentation_summary(results, start))


def _cmd_lagreg(ctx: _Context, out: ReportWriter) -> None:
    market = market_series(ctx.cfg)
    if market is None:
        raise ConfigError("lagreg needs inputs.market")
    ctx.ensure_series()
    k_max = ctx.cfg.get("lag", "k_max")
    rows = []
    for name, (_, z) in ctx.sentiment.items():
        rows += lag_sweep(z, market, k_max, name)
    out.write("lagreg/lag_sweep.csv", lag_table_csv(rows))


def _cmd_periods(ctx: _Context, out: ReportWriter) -> None:
    ctx.ensure_series()
    cfg = ctx.cfg
    configured = cfg.get("periods", "break_date")
    if configured is not None:
        break_date = date.fromisoformat(str(configured))
        source = "config"
    else:
        ctx.ensure_segmentations()
        bp = common_break(ctx.segmentations)
        break_date = cfg.start + timedelta(days=bp)
        source = f"most common breakpoint (observation {bp})"
    series = {name: raw for name, (raw, _) in ctx.sentiment.items()}
    lex = emotion_lexicon(cfg, ctx.scorers)
    if lex is not None:
        series.update({f"emotion:{k}": v for k, v in emotion_series(cfg, ctx.records, lex).items()})
    out.write("periods/mann_whitney.csv", period_tests(series, break_date))
    first = next(iter(series.values()))
    split = split_periods(first, break_date)
    out.write_json(
        "periods/split.json",
        {
            "break_date": break_date.isoformat(),
            "source": source,
            "period_a": [split.period_a.start_date.isoformat(), split.period_a.end_date.isoformat(), len(split.period_a)],
            "period_b": [split.period_b.start_date.isoformat(), split.period_b.end_date.isoformat(), len(split.period_b)],
        },
    )


def _cmd_classify(ctx: _Context, out: ReportWriter) -> None:
    out.write_json("classify/metrics.json", classification_bench(ctx.cfg))


def _cmd_simulate(ctx: _Context, out: ReportWriter) -> None:
    simulate(ctx.cfg, out)


_STEPS = {
    "score": (_cmd_score,),
    "series": (_cmd_series,),
    "breaks": (_cmd_breaks,),
    "lagreg": (_cmd_lagreg,),
    "periods": (_cmd_periods,),
    "classify": (_cmd_classify,),
    "simulate": (_cmd_simulate,),
    "all": (_cmd_series, _cmd_breaks, _cmd_lagreg, _cmd_periods, _cmd_classify),
}


def run(command: str, cfg: PipelineConfig, out_dir: Path | None = None) -> list[Path]:
    """Run one command and publish its reports; returns the written paths."""
    if command not in _STEPS:
        raise ConfigError(f"unknown command {command!r}")
    out = ReportWriter(out_dir if out_dir is not None else cfg.output_dir)
    ctx = _Context(cfg)
    for step in _STEPS[command]:
        step(ctx, out)
    out.write_json(
        f"manifest_{command}.json",
        {"toolkit_version": __version__, "format_version": FORMAT_VERSION, "command": command, "files": sorted(out.files)},
    )
    return out.commit()


def run_breaks_on_series(path: Path, cfg: PipelineConfig, out_dir: Path) -> list[Path]:
    """Segment a ready-made ``date,value`` series CSV."""
    series = DailySeries.from_csv(_read(path), path.stem)
    out = ReportWriter(out_dir)
    res = segment(series, cfg)
    write_segmentation(out, path.stem, res, series.start_date)
    out.write("breaks/summary.csv", segmentation_summary({path.stem: res}, series.start_date))
    return out.commit()


# -- demo dataset ------------------------------------------------------------

DEMO_START = date(2019, 10, 1)
DEMO_END = date(2020, 5, 31)
DEMO_FILES = ("afinn.tsv", "bing.tsv", "syuzhet.tsv", "nrc.tsv", "shifters.tsv", "stopwords.txt")

DEMO_CONFIG = """\
# Demo configuration; paths are relative to this file.
[inputs]
tweets = "tweets.jsonl"
tweets_format = "jsonl"
market = "market.csv"
stoplist = "lexicons/stopwords.txt"
labeled = "labeled.csv"

[range]
start = 2019-10-01
end = 2020-05-31
empty_days = "error"

[[scorers]]
name = "afinn"
mode = "unigram"
lexicon = "lexicons/afinn.tsv"

[[scorers]]
name = "bing"
mode = "unigram"
lexicon = "lexicons/bing.tsv"

[[scorers]]
name = "syuzhet"
mode = "unigram"
lexicon = "lexicons/syuzhet.tsv"

[[scorers]]
name = "nrc"
mode = "emotion"
lexicon = "lexicons/nrc.tsv"

[[scorers]]
name = "shifted_afinn"
mode = "shifted"
lexicon = "lexicons/afinn.tsv"
shifters = "lexicons/shifters.tsv"
window = 4

[[scorers]]
name = "shifted_bing"
mode = "shifted"
lexicon = "lexicons/bing.tsv"
shifters = "lexicons/shifters.tsv"
window = 4

[emotions]
lexicon = "lexicons/nrc.tsv"

[breaks]
m_max = 5
h_min_fraction = 0.15

[lag]
k_max = 50

[classify]
alpha = 1.0
c_penalty = 1.0
ratio = 0.8
seed = 42
epochs = 50
min_df = 1
stratify = false
solver = "smo"
runs = ["whole", "A", "B"]

[simulate]
n = 244
start = 2019-10-01
segment_means = [1.0, -1.0]
break_indices = [143]
noise_sd = 0.3
seed = 7
docs_per_day = 100
lexicon = "lexicons/afinn.tsv"

[output]
dir = "out"
"""

_TOPIC_WORDS = ("covid", "virus", "lockdown", "hospital", "cases")
_NEUTRAL_WORDS = ("italy", "rome", "milan", "news", "today", "people", "city", "government", "travel", "food")
_STOP_WORDS = ("the", "and", "in", "of", "to", "is")


def write_demo(target: Path, docs_per_day: int = 40) -> Path:
    """Write a small, fully synthetic input set plus ``config.toml``."""
    target = Path(target)
    lex_dir = target / "lexicons"
    lex_dir.mkdir(parents=True, exist_ok=True)
    pkg = resources.files("sentibreak.data.demo")
    for name in DEMO_FILES:
        (lex_dir / name).write_bytes(pkg.joinpath(name).read_bytes())
    afinn = ValenceLexicon.load("afinn", (lex_dir / "afinn.tsv").read_bytes())
    n = (DEMO_END - DEMO_START).days + 1

    schedule = RegimeSchedule([1.2, -1.4, -0.6], [143, 199], noise_sd=0.35, seed=2020)
    tweets = gen_corpus(n, schedule, afinn, docs_per_day, DEMO_START)
    (target / "tweets.jsonl").write_text(dump_tweets(tweets), encoding="utf-8")

    # market: level follows a 3..12-day lagged average of the sentiment target
    targets = gen_step_series(n, schedule, DEMO_START).values
    rng = PortableRng(31)
    walk = np.cumsum(45.0 * rng.normal(n))
    lagged = np.array([targets[max(0, t - 12) : max(1, t - 2)].mean() for t in range(n)])
    close = 22000.0 + 1900.0 * lagged + walk
    lines = ["date,close"]
    for t in range(n):
        d = DEMO_START + timedelta(days=t)
        if d.weekday() < 5 or t in (0, n - 1):
            lines.append(f"{d.isoformat()},{close[t]:.2f}")
    (target / "market.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    (target / "labeled.csv").write_text(_demo_labeled(n, afinn), encoding="utf-8")
    (target / "config.toml").write_text(DEMO_CONFIG, encoding="utf-8")
    return target / "config.toml"


def _demo_labeled(n_days: int, lex: ValenceLexicon, n_docs: int = 900) -> str:
    pos = sorted(t for t, v in lex.entries.items() if v > 0)
    neg = sorted(t for t, v in lex.entries.items() if v < 0)
    rng = PortableRng(99)
    days = rng.integers(n_days, n_docs)
    u = rng.uniform(n_docs * 12).reshape(n_docs, 12)
    picks = rng.integers(10_000, n_docs * 12).reshape(n_docs, 12)
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "period", "label", "text"])
    for i in range(n_docs):
        day = int(days[i])
        period = "A" if day < 143 else "B"
        positive = u[i, 0] < (0.6 if period == "A" else 0.3)
        words = []
        for s in range(1, 4):
            # each polar word agrees with the label 80% of the time
            agree = u[i, s] < 0.8
            pool = pos if positive == agree else neg
            words.append(pool[picks[i, s] % len(pool)])
        words += [_NEUTRAL_WORDS[picks[i, s] % len(_NEUTRAL_WORDS)] for s in range(4, 8)]
        words += [_STOP_WORDS[picks[i, s] % len(_STOP_WORDS)] for s in range(8, 10)]
        if period == "B" and not positive and u[i, 10] < 0.6:
            words.append(_TOPIC_WORDS[picks[i, 10] % len(_TOPIC_WORDS)])
        if u[i, 11] < 0.1:
            words.append("2020")
        order = np.argsort(u[i, : len(words)] if len(words) <= 12 else np.arange(len(words)), kind="stable")
        text = " ".join(words[k] for k in order) if len(words) <= 12 else " ".join(words)
        w.writerow([f"lab-{i:05d}", period, "positive" if positive else "negative", text.capitalize() + "!"])
    return buf.getvalue()
