"""Polarity classification benchmark: document-term counts, multinomial
naive Bayes, a linear soft-margin SVM and per-class metrics."""

from __future__ import annotations

import csv
import io
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from sentibreak.errors import DataError
from sentibreak.ingest import _decode
from sentibreak.rng import PortableRng

POSITIVE = "positive"
NEGATIVE = "negative"
CLASSES = (NEGATIVE, POSITIVE)  # sorted; ties resolve to the first


@dataclass
class LabeledDoc:
    tokens: list[str]
    label: str
    period: str = ""
    id: str = ""

    def __post_init__(self):
        if self.label not in CLASSES:
            raise DataError(f"label must be positive or negative, got {self.label!r}")


def parse_labeled(stream: IO[bytes] | bytes) -> list[tuple[str, str, str, str]]:
    """Rows of ``id,period,label,text`` as tuples (text left raw)."""
    reader = csv.DictReader(io.StringIO(_decode(stream), newline=""))
    need = {"id", "period", "label", "text"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise DataError("labeled CSV needs header id,period,label,text")
    rows = []
    for row in reader:
        label = (row["label"] or "").strip().lower()
        if label not in CLASSES:
            raise DataError(f"row {reader.line_num}: label must be positive or negative, got {row['label']!r}")
        rows.append((row["id"], (row["period"] or "").strip(), label, row["text"] or ""))
    return rows


@dataclass(frozen=True)
class DocumentTermMatrix:
    vocab: list[str]
    rows: sparse.csr_matrix

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.vocab)}

    def transform(self, docs: Iterable[Sequence[str] | LabeledDoc]) -> sparse.csr_matrix:
        """Count matrix of new documents over this vocabulary (OOV dropped)."""
        return _counts(docs, self.index)


def _tokens_of(doc) -> Sequence[str]:
    return doc.tokens if isinstance(doc, LabeledDoc) else doc


def _counts(docs, index: Mapping[str, int]) -> sparse.csr_matrix:
    data, cols, indptr = [], [], [0]
    for doc in docs:
        c = Counter(index[t] for t in _tokens_of(doc) if t in index)
        for j in sorted(c):
            cols.append(j)
            data.append(c[j])
        indptr.append(len(cols))
    return sparse.csr_matrix(
        (np.array(data, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, len(index)),
    )


def build_dtm(docs: Sequence[Sequence[str] | LabeledDoc], min_df: int = 1) -> DocumentTermMatrix:
    if min_df < 1:
        raise DataError("min_df must be >= 1")
    df = Counter()
    for doc in docs:
        df.update(set(_tokens_of(doc)))
    vocab = sorted(t for t, c in df.items() if c >= min_df)
    if not vocab:
        raise DataError(f"empty vocabulary (min_df={min_df})")
    index = {t: i for i, t in enumerate(vocab)}
    return DocumentTermMatrix(vocab, _counts(docs, index))


def _as_matrix(x) -> sparse.csr_matrix:
    if sparse.issparse(x):
        return sparse.csr_matrix(x)
    return sparse.csr_matrix(np.atleast_2d(np.asarray(x, dtype=float)))


# -- naive Bayes -----------------------------------------------------------


@dataclass(frozen=True)
class NbModel:
    classes: tuple[str, ...]
    class_log_priors: np.ndarray  # (k,)
    feature_log_likelihoods: np.ndarray  # (k, |vocab|)
    smoothing_alpha: float
    vocab: list[str] = field(default_factory=list)


def train_nb(dtm: DocumentTermMatrix, labels: Sequence[str], alpha: float = 1.0) -> NbModel:
    """Multinomial NB with additive smoothing on raw term counts."""
    if not alpha > 0:
        raise DataError("smoothing alpha must be > 0")
    X = _as_matrix(dtm.rows)
    y = np.asarray(labels)
    if X.shape[0] != y.size:
        raise DataError("one label per document required")
    missing = [c for c in CLASSES if not np.any(y == c)]
    if missing:
        raise DataError(f"class absent from training data: {', '.join(missing)}")
    priors, likelihoods = [], []
    V = X.shape[1]
    for c in CLASSES:
        mask = y == c
        priors.append(math.log(mask.sum() / y.size))
        term_counts = np.asarray(X[mask].sum(axis=0), dtype=float).ravel()
        likelihoods.append(np.log(term_counts + alpha) - math.log(term_counts.sum() + alpha * V))
    return NbModel(CLASSES, np.array(priors), np.vstack(likelihoods), float(alpha), list(dtm.vocab))


def nb_log_posteriors(model: NbModel, doc_counts) -> np.ndarray:
    """Unnormalized class log posteriors, one row per document."""
    X = _as_matrix(doc_counts).astype(float)
    return model.class_log_priors[None, :] + np.asarray(X @ model.feature_log_likelihoods.T)


def predict_nb(model: NbModel, doc_counts) -> tuple[str, dict[str, float]]:
    lp = nb_log_posteriors(model, doc_counts)[0]
    best = int(np.argmax(lp))
    return model.classes[best], dict(zip(model.classes, map(float, lp)))


def predict_nb_many(model: NbModel, X) -> list[str]:
    lp = nb_log_posteriors(model, X)
    return [model.classes[i] for i in np.argmax(lp, axis=1)]


# -- linear SVM ------------------------------------------------------------


@dataclass(frozen=True)
class SvmModel:
    w: np.ndarray
    b: float
    c_penalty: float
    vocab: list[str] = field(default_factory=list)
    objective: float = math.nan


def _signs(labels: Sequence[str]) -> np.ndarray:
    y = np.array([1.0 if l == POSITIVE else -1.0 for l in labels])
    for l in labels:
        if l not in CLASSES:
            raise DataError(f"unknown label {l!r}")
    return y


def svm_objective(w: np.ndarray, b: float, X, y: np.ndarray, c_penalty: float) -> float:
    """0.5 ||w||^2 + C * sum of hinge losses."""
    margins = y * (np.asarray(_as_matrix(X) @ w).ravel() + b)
    return 0.5 * float(w @ w) + c_penalty * float(np.maximum(0.0, 1.0 - margins).sum())


def slacks(model: SvmModel, X, labels: Sequence[str]) -> np.ndarray:
    y = _signs(labels)
    margins = y * (np.asarray(_as_matrix(X) @ model.w).ravel() + model.b)
    return np.maximum(0.0, 1.0 - margins)


def _best_bias(scores: np.ndarray, y: np.ndarray) -> float:
    """Smallest b minimizing sum_i max(0, 1 - y_i (scores_i + b)).

    The loss is convex and piecewise linear with kinks at y_i - scores_i;
    its right derivative at b is #{neg: kink <= b} - #{pos: kink > b}.
    """
    kinks = y - scores
    pos = np.sort(kinks[y > 0])
    neg = np.sort(kinks[y < 0])
    cand = np.unique(kinks)
    right = np.searchsorted(neg, cand, side="right") - (pos.size - np.searchsorted(pos, cand, side="right"))
    return float(cand[np.flatnonzero(right >= 0)[0]])


def _prepare_svm(dtm, labels, c_penalty, epochs):
    if isinstance(dtm, DocumentTermMatrix):
        X, vocab = _as_matrix(dtm.rows).astype(float), list(dtm.vocab)
    else:
        X, vocab = _as_matrix(dtm).astype(float), []
    y = _signs(labels)
    n, d = X.shape
    if n != y.size:
        raise DataError("one label per document required")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DataError("SVM training needs both classes")
    if not c_penalty > 0:
        raise DataError("c_penalty must be > 0")
    if epochs < 1:
        raise DataError("epochs must be >= 1")
    if X.nnz == 0:
        raise DataError("all training rows are zero")
    return X, vocab, y


def train_svm(
    dtm: DocumentTermMatrix | sparse.spmatrix | np.ndarray,
    labels: Sequence[str],
    c_penalty: float = 1.0,
    epochs: int = 50,
    seed: int = 0,
    solver: str = "smo",
    tol: float = 1e-6,
) -> SvmModel:
    """Linear soft-margin SVM minimizing
    ``0.5 ||w||^2 + C sum_i max(0, 1 - y_i (w.x_i + b))``.

    ``solver="smo"`` (default) solves the dual QP by sequential minimal
    optimization with second-order working-pair selection; it is
    deterministic and ``seed`` is unused. ``solver="subgradient"`` runs
    ``epochs`` seeded Pegasos passes instead (see ``_train_subgradient``).
    Either way the bias is finally set to its exact minimizer for the
    learned w.
    """
    X, vocab, y = _prepare_svm(dtm, labels, c_penalty, epochs)
    if solver == "smo":
        w = _smo(X, y, float(c_penalty), tol, max_iter=max(100_000, 200 * epochs * X.shape[0]))
    elif solver == "subgradient":
        w = _train_subgradient(X, y, float(c_penalty), epochs, seed)
    else:
        raise DataError(f"unknown SVM solver {solver!r}")
    b = _best_bias(np.asarray(X @ w).ravel(), y)
    return SvmModel(w, b, float(c_penalty), vocab, svm_objective(w, b, X, y, c_penalty))


def _smo(X: sparse.csr_matrix, y: np.ndarray, C: float, tol: float, max_iter: int) -> np.ndarray:
    """Dual coordinate-pair ascent for the linear soft-margin SVM.

    Dual: min 0.5 a'Qa - sum(a), 0 <= a <= C, y'a = 0, Q_ij = y_i y_j x_i.x_j.
    Working pairs follow the maximal-violating i and the second-order
    choice of j (Fan, Chen and Lin 2005). Returns w = sum_i a_i y_i x_i.
    """
    n, d = X.shape
    Xt = X.T.tocsr()
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q a - 1
    diag = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    w = np.zeros(d)
    tau = 1e-12

    def q_col(i):
        xi = X.getrow(i)
        return y * y[i] * np.asarray(X @ xi.T.toarray()).ravel()

    for _ in range(max_iter):
        minus_yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(minus_yg[up])])
        g_max = minus_yg[i]
        g_min = np.min(minus_yg[low])
        if g_max - g_min < tol:
            break
        Qi = q_col(i)
        cand = np.flatnonzero(low & (minus_yg < g_max))
        b_ij = g_max - minus_yg[cand]
        a_ij = diag[i] + diag[cand] - 2.0 * y[i] * y[cand] * Qi[cand]
        a_ij = np.where(a_ij > 0, a_ij, tau)
        j = int(cand[np.argmax(b_ij * b_ij / a_ij)])
        Qj = q_col(j)

        old_i, old_j = alpha[i], alpha[j]
        quad = max(diag[i] + diag[j] - 2.0 * y[i] * y[j] * Qi[j], tau)
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += Qi * (ai - old_i) + Qj * (aj - old_j)
    coef = alpha * y
    return np.asarray(Xt @ coef).ravel()


def _train_subgradient(X: sparse.csr_matrix, y: np.ndarray, c_penalty: float, epochs: int, seed: int) -> np.ndarray:
    """Seeded stochastic subgradient (Pegasos) passes over the data.

    w takes steps of size 1/(lambda t), lambda = 1/(C n), visiting
    documents in a seeded order, each followed by a projection onto the
    ball that must contain the optimum; the bias is held at its exact
    minimizer from the previous pass. Returns the best iterate seen (last
    or pass average) by primal objective. Slow to reach high accuracy
    when C n is large.
    """
    n, d = X.shape
    lam = 1.0 / (c_penalty * n)
    radius = math.sqrt(2.0 * c_penalty * n)
    indptr, indices, data = X.indptr, X.indices, X.data
    rng = PortableRng(seed)

    # w is held as scale * v so the shrink step is O(1)
    v = np.zeros(d)
    scale = 1.0
    sq_norm = 0.0
    avg = np.zeros(d)
    b = 0.0
    t = 0

    def evaluate(w):
        scores = np.asarray(X @ w).ravel()
        bb = _best_bias(scores, y)
        return svm_objective(w, bb, X, y, c_penalty), bb

    best_w, best_b = np.zeros(d), 0.0
    best_obj, best_b = evaluate(best_w)
    for _ in range(epochs):
        avg[:] = 0.0
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            lo, hi = indptr[i], indptr[i + 1]
            cols, vals = indices[lo:hi], data[lo:hi]
            margin = y[i] * (scale * float(v[cols] @ vals) + b)
            shrink = 1.0 - eta * lam
            if shrink <= 0.0:
                v[:] = 0.0
                scale = 1.0
                sq_norm = 0.0
            else:
                scale *= shrink
                sq_norm *= shrink * shrink
            if margin < 1.0:
                step = eta * y[i] / scale
                old = v[cols]
                v[cols] = old + step * vals
                sq_norm += scale * scale * float(v[cols] @ v[cols] - old @ old)
            norm = math.sqrt(max(sq_norm, 0.0))
            if norm > radius:
                scale *= radius / norm
                sq_norm = radius * radius
            if scale < 1e-100:
                v *= scale
                scale = 1.0
            avg += scale * v
        last = scale * v
        for cand in (last, avg / n):
            obj, bb = evaluate(cand)
            if obj < best_obj:
                best_obj, best_w, best_b = obj, cand.copy(), bb
        b = _best_bias(np.asarray(X @ last).ravel(), y)
    return best_w


def svm_margins(model: SvmModel, X) -> np.ndarray:
    return np.asarray(_as_matrix(X).astype(float) @ model.w).ravel() + model.b


def predict_svm(model: SvmModel, doc_counts) -> tuple[str, float]:
    """Label by the sign of w.x + b; a zero margin counts as negative."""
    m = float(svm_margins(model, doc_counts)[0])
    return (POSITIVE if m > 0 else NEGATIVE), m


def predict_svm_many(model: SvmModel, X) -> list[str]:
    return [POSITIVE if m > 0 else NEGATIVE for m in svm_margins(model, X)]


# -- splitting and metrics -------------------------------------------------


def split_train_test(docs: Sequence, ratio: float = 0.8, seed: int = 0, stratify: bool = False):
    """Seeded shuffle, then the first floor(ratio * n) items train.

    With ``stratify`` each label is shuffled and cut separately.
    """
    if not 0 < ratio < 1:
        raise DataError(f"ratio must lie strictly between 0 and 1, got {ratio}")
    n = len(docs)
    if n < 2:
        raise DataError("need at least 2 documents to split")
    rng = PortableRng(seed)
    if stratify:
        train, test = [], []
        for c in CLASSES:
            members = [d for d in docs if d.label == c]
            order = rng.permutation(len(members))
            cut = math.floor(ratio * len(members))
            train += [members[i] for i in order[:cut]]
            test += [members[i] for i in order[cut:]]
    else:
        order = rng.permutation(n)
        cut = math.floor(ratio * n)
        train = [docs[i] for i in order[:cut]]
        test = [docs[i] for i in order[cut:]]
    if not train or not test:
        raise DataError(f"split of {n} docs at ratio {ratio} leaves a side empty")
    return train, test


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    per_class: dict[str, ClassMetrics]
    accuracy: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {c: vars(m).copy() for c, m in self.per_class.items()}
        out["accuracy"] = self.accuracy
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def evaluate(predictions: Sequence[str], truth: Sequence[str], classes: Sequence[str] = CLASSES) -> MetricsReport:
    if len(predictions) != len(truth):
        raise DataError("predictions and truth differ in length")
    if not truth:
        raise DataError("nothing to evaluate")
    flags = []
    per_class = {}
    pairs = list(zip(predictions, truth))
    for c in classes:
        tp = sum(1 for p, t in pairs if p == c and t == c)
        fp = sum(1 for p, t in pairs if p == c and t != c)
        fn = sum(1 for p, t in pairs if p != c and t == c)
        if tp + fp == 0:
            precision = 0.0
            flags.append(f"{c}: precision undefined (no predictions)")
        else:
            precision = tp / (tp + fp)
        if tp + fn == 0:
            recall = 0.0
            flags.append(f"{c}: recall undefined (no support)")
        else:
            recall = tp / (tp + fn)
        if precision + recall == 0:
            f1 = 0.0
            flags.append(f"{c}: f1 undefined")
        else:
            f1 = 2 * precision * recall / (precision + recall)
        per_class[c] = ClassMetrics(precision, recall, f1, tp + fn)
    accuracy = sum(1 for p, t in pairs if p == t) / len(pairs)
    return MetricsReport(per_class, accuracy, tuple(flags))


def check_accuracy_consistency(
    supports: Mapping[str, int], recalls: Mapping[str, float], accuracy: float, decimals: int = 2
) -> tuple[bool, list[dict[str, int]]]:
    """Do printed per-class recalls and supports imply the printed accuracy?

    Enumerates the true-positive counts compatible with each rounded
    recall and returns ``(consistent, compatible_tp_combinations)``.
    """
    half = 0.5 * 10.0**-decimals
    options = {}
    for c, s in supports.items():
        options[c] = [tp for tp in range(s + 1) if abs(tp / s - recalls[c]) <= half + 1e-12]
    total = sum(supports.values())
    hits = []
    for combo in itertools.product(*options.values()):
        acc = sum(combo) / total
        if abs(acc - accuracy) <= half + 1e-12:
            hits.append(dict(zip(options, combo)))
    return bool(hits), hits
