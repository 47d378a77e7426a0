from __future__ import annotations

import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentibreak.breaks import select_m_bic
from sentibreak.errors import DataError
from sentibreak.ingest import dump_tweets, parse_tweets
from sentibreak.sentiment import ValenceLexicon, score_unigram
from sentibreak.series import daily_mean, zscore
from sentibreak.synthkit import RegimeSchedule, gen_corpus, gen_step_series

LEX = ValenceLexicon("t", {"good": 3, "nice": 2, "happy": 1, "bad": -3, "sad": -2, "awful": -4})


class TestStepSeries:
    def test_noise_free_is_piecewise_constant(self):
        s = gen_step_series(10, RegimeSchedule([1.0, -2.0, 0.5], [3, 7]))
        assert s.values.tolist() == [1.0] * 3 + [-2.0] * 4 + [0.5] * 3

    def test_deterministic(self):
        sched = RegimeSchedule([0.0, 1.0], [5], noise_sd=1.0, seed=4)
        assert gen_step_series(12, sched).values.tobytes() == gen_step_series(12, sched).values.tobytes()
        other = RegimeSchedule([0.0, 1.0], [5], noise_sd=1.0, seed=5)
        assert gen_step_series(12, sched).values.tobytes() != gen_step_series(12, other).values.tobytes()

    @pytest.mark.parametrize(
        "means,breaks",
        [([0.0], [3]), ([0.0, 1.0], [0]), ([0.0, 1.0], [10]), ([0.0, 1.0, 2.0], [5, 4])],
    )
    def test_invalid_schedules(self, means, breaks):
        with pytest.raises(DataError):
            gen_step_series(10, RegimeSchedule(means, breaks))

    def test_negative_noise(self):
        with pytest.raises(DataError):
            gen_step_series(10, RegimeSchedule([0.0], [], noise_sd=-1))

    def test_recovers_break(self):
        s = gen_step_series(244, RegimeSchedule([0.0, 5.0], [144], noise_sd=1.0, seed=1))
        res = select_m_bic(s.values)
        assert res.chosen_m >= 1 and any(abs(b - 144) <= 2 for b in res.chosen.breakpoints)

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_segment_means_converge(self, seed):
        sched = RegimeSchedule([2.0, -1.0, 0.5], [60, 150], noise_sd=1.5, seed=seed)
        v = gen_step_series(244, sched).values
        for (a, b), mu in zip([(0, 60), (60, 150), (150, 244)], sched.segment_means):
            assert abs(v[a:b].mean() - mu) <= 4 * 1.5 / math.sqrt(b - a)


class TestCorpus:
    def test_zero_docs_rejected(self):
        with pytest.raises(DataError):
            gen_corpus(5, RegimeSchedule([1.0], []), LEX, 0)

    def test_one_polarity_rejected(self):
        with pytest.raises(DataError):
            gen_corpus(5, RegimeSchedule([1.0], []), ValenceLexicon("p", {"good": 1}), 10)

    def test_unreachable_target(self):
        with pytest.raises(DataError, match="outside attainable range"):
            gen_corpus(5, RegimeSchedule([100.0], []), LEX, 10)

    def test_constant_positive_within_three_standard_errors(self):
        days, per_day = 20, 200
        recs = gen_corpus(days, RegimeSchedule([1.5], []), LEX, per_day)
        scored = [(r.created_at, score_unigram(r.prepare().tokens, LEX)) for r in recs]
        s = daily_mean(scored, date(2019, 10, 1), date(2019, 10, 20))
        by_day = np.array([v for _, v in scored]).reshape(days, per_day)
        se = by_day.std(axis=1, ddof=1) / math.sqrt(per_day)
        assert (s.values > 0).all()
        assert (np.abs(s.values - 1.5) <= 3 * se).mean() >= 0.9

    def test_flip_found_by_pipeline(self):
        recs = gen_corpus(120, RegimeSchedule([1.0, -1.0], [70], noise_sd=0.2, seed=3), LEX, 60)
        back, skipped = parse_tweets(dump_tweets(recs).encode())
        assert skipped == 0
        scored = [(r.created_at, score_unigram(r.prepare().tokens, LEX)) for r in back]
        z = zscore(daily_mean(scored, date(2019, 10, 1), date(2020, 1, 28)))
        res = select_m_bic(z.values)
        assert any(abs(b - 70) <= 2 for b in res.chosen.breakpoints)

    def test_reproducible_bytes(self):
        sched = RegimeSchedule([0.5, -0.5], [3], noise_sd=0.1, seed=8)
        a = dump_tweets(gen_corpus(6, sched, LEX, 5))
        b = dump_tweets(gen_corpus(6, sched, LEX, 5))
        assert a == b
        c = dump_tweets(gen_corpus(6, RegimeSchedule([0.5, -0.5], [3], noise_sd=0.1, seed=9), LEX, 5))
        assert a != c

    def test_decorations_are_removed_by_cleaning(self):
        recs = gen_corpus(3, RegimeSchedule([0.0], []), LEX, 70)
        raw = " ".join(r.raw_text for r in recs)
        assert "#Italy" in raw and "@user" in raw and "https://" in raw
        for r in recs:
            assert all(t.isalpha() and t.islower() for t in r.prepare().tokens)
