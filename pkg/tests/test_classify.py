from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from sentibreak.classify import (
    CLASSES,
    LabeledDoc,
    SvmModel,
    build_dtm,
    check_accuracy_consistency,
    evaluate,
    parse_labeled,
    predict_nb,
    predict_nb_many,
    predict_svm,
    predict_svm_many,
    slacks,
    split_train_test,
    svm_objective,
    train_nb,
    train_svm,
)
from sentibreak.errors import DataError

from tests.oracles import nb_posteriors_fraction, svm_grid_oracle, svm_objective_ref


def _labels(y):
    return ["positive" if v > 0 else "negative" for v in y]


class TestDtm:
    def test_counts(self):
        dtm = build_dtm([["good", "movie"], ["bad", "movie"]])
        assert dtm.vocab == ["bad", "good", "movie"]
        assert dtm.rows.toarray().tolist() == [[0, 1, 1], [1, 0, 1]]

    def test_min_df(self):
        assert build_dtm([["good", "movie"], ["bad", "movie"]], min_df=2).vocab == ["movie"]

    def test_oov_row_is_zero(self):
        dtm = build_dtm([["good"], ["bad"]])
        assert dtm.transform([["unseen", "words"]]).toarray().tolist() == [[0, 0]]

    def test_empty_vocab(self):
        with pytest.raises(DataError):
            build_dtm([["a"], ["b"]], min_df=2)

    @given(st.lists(st.lists(st.sampled_from("abcdefg"), max_size=8), min_size=1, max_size=12))
    def test_structure(self, docs):
        if not any(docs):
            return
        dtm = build_dtm(docs)
        assert dtm.vocab == sorted(set(dtm.vocab))
        dense = dtm.rows.toarray()
        assert dense.shape == (len(docs), len(dtm.vocab)) and (dense >= 0).all()
        for row, doc in zip(dense, docs):
            assert dict(zip(dtm.vocab, row.tolist())) == {t: Counter(doc)[t] for t in dtm.vocab}


class TestNaiveBayes:
    def _toy(self):
        dtm = build_dtm([["good", "good"], ["bad"]])
        return dtm, train_nb(dtm, ["positive", "negative"], 1.0)

    def test_laplace_example(self):
        dtm, m = self._toy()
        pos, neg = CLASSES.index("positive"), CLASSES.index("negative")
        g, b = dtm.vocab.index("good"), dtm.vocab.index("bad")
        lik = np.exp(m.feature_log_likelihoods)
        assert lik[pos, g] == pytest.approx(3 / 4, abs=1e-15)
        assert lik[pos, b] == pytest.approx(1 / 4, abs=1e-15)
        assert lik[neg, g] == pytest.approx(1 / 3, abs=1e-15)
        assert lik[neg, b] == pytest.approx(2 / 3, abs=1e-15)

    def test_predictions(self):
        dtm, m = self._toy()
        label, lp = predict_nb(m, dtm.transform([["good"]]))
        assert label == "positive"
        assert lp["positive"] == pytest.approx(math.log(0.5) + math.log(0.75))
        assert lp["negative"] == pytest.approx(math.log(0.5) + math.log(1 / 3))
        assert predict_nb(m, dtm.transform([["bad"]]))[0] == "negative"

    def test_unseen_tie_goes_negative(self):
        dtm, m = self._toy()
        assert predict_nb(m, dtm.transform([["zzz"]]))[0] == "negative"

    def test_balanced_priors(self):
        docs = [["a"]] * 1449 + [["b"]] * 1449
        m = train_nb(build_dtm(docs), ["positive"] * 1449 + ["negative"] * 1449)
        np.testing.assert_allclose(m.class_log_priors, math.log(0.5))

    def test_large_alpha_flattens(self):
        dtm = build_dtm([["a", "a", "b"], ["c"], ["a", "c"], ["b", "b"]])
        m = train_nb(dtm, ["positive", "negative", "positive", "negative"], alpha=1e9)
        np.testing.assert_allclose(np.exp(m.feature_log_likelihoods), 1 / 3, rtol=1e-6)

    def test_missing_class(self):
        with pytest.raises(DataError):
            train_nb(build_dtm([["a"], ["b"]]), ["positive", "positive"])

    @given(
        st.lists(
            st.tuples(st.lists(st.sampled_from("abcde"), min_size=1, max_size=6), st.sampled_from(CLASSES)),
            min_size=2,
            max_size=10,
        ),
        st.lists(st.sampled_from("abcdefz"), max_size=6),
        st.sampled_from([0.5, 1, 2]),
    )
    @settings(max_examples=150, deadline=None)
    def test_matches_exact_bayes_rule(self, train, doc, alpha):
        labels = [l for _, l in train]
        if len(set(labels)) < 2:
            return
        docs = [d for d, _ in train]
        dtm = build_dtm(docs)
        m = train_nb(dtm, labels, alpha)
        post = nb_posteriors_fraction(docs, labels, doc, Fraction(alpha))
        label, lp = predict_nb(m, dtm.transform([doc]))
        # normalizing the log posteriors reproduces Bayes' rule with evidence
        z = np.logaddexp.reduce(list(lp.values()))
        for c in CLASSES:
            assert math.exp(lp[c] - z) == pytest.approx(float(post[c]), rel=1e-9, abs=1e-12)
        best = max(CLASSES, key=lambda c: (post[c], c == "negative"))
        if post["positive"] != post["negative"]:
            assert label == best
        assert np.exp(m.feature_log_likelihoods).sum(axis=1) == pytest.approx([1, 1], abs=1e-9)

    @given(
        st.lists(
            st.tuples(st.lists(st.sampled_from("abcde"), min_size=1, max_size=6), st.sampled_from(CLASSES)),
            min_size=2,
            max_size=10,
        ),
        st.sampled_from([0.5, 1.0, 3.0]),
    )
    @settings(max_examples=60, deadline=None)
    def test_duplicated_training_set_with_doubled_alpha(self, train, alpha):
        labels = [l for _, l in train]
        if len(set(labels)) < 2:
            return
        docs = [d for d, _ in train]
        m1 = train_nb(build_dtm(docs), labels, alpha)
        m2 = train_nb(build_dtm(docs + docs), labels + labels, 2 * alpha)
        np.testing.assert_allclose(m1.class_log_priors, m2.class_log_priors, atol=1e-12)
        np.testing.assert_allclose(m1.feature_log_likelihoods, m2.feature_log_likelihoods, atol=1e-12)
        probe = build_dtm(docs).transform([[c] for c in "abcde"] + docs)
        assert predict_nb_many(m1, probe) == predict_nb_many(m2, probe)

    def test_duplication_at_fixed_alpha_can_flip_a_prediction(self):
        # smoothing weighs less against doubled counts, so a prediction
        # that hinges on it may change
        docs = [list("dbcd"), list("abd"), ["d"], list("bdd"), list("cd"), list("bdd")]
        labels = ["negative", "positive", "positive", "negative", "negative", "positive"]
        one, two = build_dtm(docs), build_dtm(docs + docs)
        p1 = predict_nb(train_nb(one, labels), one.transform([["d"]]))[0]
        p2 = predict_nb(train_nb(two, labels + labels), two.transform([["d"]]))[0]
        assert (p1, p2) == ("negative", "positive")


class TestSvm:
    def test_symmetric_pair(self):
        m = train_svm(np.array([[-1.0], [1.0]]), ["negative", "positive"], c_penalty=100)
        assert m.w[0] == pytest.approx(1, abs=1e-6) and m.b == pytest.approx(0, abs=1e-6)
        assert predict_svm(m, np.array([[3.0]])) == ("positive", pytest.approx(3, abs=1e-5))

    def test_zero_margin_is_negative(self):
        m = SvmModel(np.array([1.0, -1.0]), 0.0, 1.0)
        assert predict_svm(m, np.array([[2.0, 2.0]])) == ("negative", 0.0)

    @given(st.floats(0.01, 100))
    def test_positive_rescaling_keeps_labels(self, c):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 3))
        m = SvmModel(np.array([0.3, -1.2, 0.5]), 0.1, 1.0)
        scaled = SvmModel(m.w * c, m.b * c, 1.0)
        assert predict_svm_many(m, X) == predict_svm_many(scaled, X)

    def test_nonseparable_has_slack(self):
        X = np.array([[0.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        labels = ["positive", "negative", "positive"]
        m = train_svm(X, labels, c_penalty=0.05)
        xi = slacks(m, X, labels)
        assert (xi > 0).any()
        assert m.objective == pytest.approx(svm_objective(m.w, m.b, X, np.array([1, -1, 1.0]), 0.05))

    def test_needs_two_classes(self):
        with pytest.raises(DataError):
            train_svm(np.eye(2), ["positive", "positive"])

    def test_all_zero_rows(self):
        with pytest.raises(DataError):
            train_svm(np.zeros((2, 2)), ["positive", "negative"])

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_grid_oracle(self, seed):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 7))
        X = rng.normal(size=(n, 2)) * 2
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        y[:2] = [1, -1]
        C = [0.1, 1.0, 10.0][seed % 3]
        m = train_svm(X, _labels(y), C)
        oracle, _ = svm_grid_oracle(X, y, C)
        assert svm_objective_ref(m.w, m.b, X, y, C) == pytest.approx(m.objective, rel=1e-12)
        assert m.objective <= oracle * 1.02
        assert oracle <= m.objective * 1.02

    def test_subgradient_solver_is_seeded(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(30, 4))
        y = np.sign(X @ np.array([1.0, -2.0, 0.5, 0.0]) + 0.1)
        a = train_svm(X, _labels(y), 1.0, epochs=5, seed=3, solver="subgradient")
        b = train_svm(X, _labels(y), 1.0, epochs=5, seed=3, solver="subgradient")
        assert a.w.tobytes() == b.w.tobytes() and a.b == b.b

    def test_sparse_input(self):
        X = sparse.csr_matrix(np.array([[1, 0, 2], [0, 1, 0], [2, 0, 1], [0, 2, 0]], dtype=float))
        m = train_svm(X, ["positive", "negative", "positive", "negative"], 10.0)
        assert predict_svm_many(m, X) == ["positive", "negative", "positive", "negative"]


class TestSplit:
    def test_sizes(self):
        train, test = split_train_test(list(range(3623)), 0.8, seed=1)
        assert (len(train), len(test)) == (2898, 725)

    def test_deterministic(self):
        assert split_train_test(list(range(50)), 0.8, 7) == split_train_test(list(range(50)), 0.8, 7)
        assert split_train_test(list(range(50)), 0.8, 7) != split_train_test(list(range(50)), 0.8, 8)

    @pytest.mark.parametrize("ratio", [0.0, 1.0, 1.5])
    def test_bad_ratio(self, ratio):
        with pytest.raises(DataError):
            split_train_test(list(range(10)), ratio)

    def test_side_empty(self):
        with pytest.raises(DataError):
            split_train_test([1, 2], 0.3)

    @given(st.lists(st.integers(0, 5), min_size=2, max_size=60), st.floats(0.05, 0.95), st.integers(0, 99))
    def test_partition(self, items, ratio, seed):
        if math.floor(ratio * len(items)) in (0, len(items)):
            return
        train, test = split_train_test(items, ratio, seed)
        assert Counter(train) + Counter(test) == Counter(items)
        assert len(train) == math.floor(ratio * len(items))

    def test_stratified(self):
        docs = [LabeledDoc([], "positive")] * 30 + [LabeledDoc([], "negative")] * 10
        train, test = split_train_test(docs, 0.8, 0, stratify=True)
        assert sum(d.label == "positive" for d in train) == 24
        assert sum(d.label == "negative" for d in train) == 8


class TestEvaluate:
    def test_hand_example(self):
        truth = ["positive"] * 4 + ["negative"] * 6
        pred = ["positive"] * 3 + ["negative"] + ["positive"] + ["negative"] * 5
        r = evaluate(pred, truth)
        p = r.per_class["positive"]
        assert (p.precision, p.recall, p.f1, p.support) == (0.75, 0.75, 0.75, 4)
        assert r.accuracy == 0.8

    def test_perfect(self):
        r = evaluate(["positive", "negative"], ["positive", "negative"])
        assert r.accuracy == 1 and all(m.f1 == 1 for m in r.per_class.values())

    def test_empty_denominator_flagged(self):
        r = evaluate(["negative"] * 3, ["negative", "positive", "negative"])
        assert r.per_class["positive"].precision == 0 and r.flags

    @given(st.lists(st.tuples(st.sampled_from(CLASSES), st.sampled_from(CLASSES)), min_size=1, max_size=50))
    def test_identities(self, pairs):
        pred, truth = zip(*pairs)
        r = evaluate(pred, truth)
        assert sum(m.support for m in r.per_class.values()) == len(truth)
        weighted = sum(m.recall * m.support for m in r.per_class.values()) / len(truth)
        assert weighted == pytest.approx(r.accuracy, abs=1e-12)
        for m in r.per_class.values():
            assert 0 <= m.precision <= 1 and 0 <= m.recall <= 1 and 0 <= m.f1 <= 1
            if m.precision + m.recall > 0:
                assert m.f1 == pytest.approx(2 * m.precision * m.recall / (m.precision + m.recall))

    def test_printed_whole_dataset_row(self):
        ok, combos = check_accuracy_consistency({"positive": 364, "negative": 360}, {"positive": 0.75, "negative": 0.89}, 0.82)
        assert ok and {"positive": 273, "negative": 320} in combos

    def test_inconsistent_row_detected(self):
        ok, _ = check_accuracy_consistency({"positive": 364, "negative": 360}, {"positive": 0.75, "negative": 0.89}, 0.70)
        assert not ok


class TestParseLabeled:
    def test_rows(self):
        rows = parse_labeled(b'id,period,label,text\n1,A,Positive,"Bello, Roma"\n')
        assert rows == [("1", "A", "positive", "Bello, Roma")]

    def test_bad_label(self):
        with pytest.raises(DataError):
            parse_labeled(b"id,period,label,text\n1,A,neutral,x\n")
