"""Simple OLS with standardized slopes, the lag sweep, Student-t tails
and the Mann-Whitney rank test."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from sentibreak.errors import DataError
from sentibreak.series import DailySeries

P_FLOOR = np.finfo(float).tiny
P_PRINT_FLOOR = 1e-15
EXACT_MAX_POOLED = 16


def format_p(p: float) -> str:
    return "< 1e-15" if p < P_PRINT_FLOOR else repr(float(p))


def student_t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t) for Student's t with ``df`` degrees."""
    if not df > 0:
        raise DataError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    # P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    tail = 0.5 * float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return tail if t >= 0 else 1.0 - tail


def two_sided_p(t: float, df: float) -> float:
    return min(1.0, max(P_FLOOR, 2.0 * student_t_sf(abs(t), df)))


@dataclass(frozen=True)
class OlsFit:
    alpha: float
    beta: float
    beta_std: float
    r2: float
    se_beta: float
    t_stat: float
    p_value: float
    n: int
    residuals: np.ndarray


def ols_simple(x: Sequence[float], y: Sequence[float]) -> OlsFit:
    """Least squares fit of ``y = alpha + beta x``.

    ``beta_std`` is the slope rescaled by sd(x)/sd(y), which for a single
    predictor is the Pearson correlation; ``r2`` is its square. The
    p-value is two-sided with n - 2 degrees of freedom.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("x and y must be 1-D and of equal length")
    n = x.size
    if n < 3:
        raise DataError(f"OLS needs n >= 3, got {n}")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if not sxx > 0:
        raise DataError("zero variance in x")
    if not syy > 0:
        raise DataError("zero variance in y")
    sxy = float(xc @ yc)
    beta = sxy / sxx
    alpha = float(y.mean() - beta * x.mean())
    beta_std = max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    r2 = beta_std * beta_std
    residuals = y - alpha - beta * x
    df = n - 2
    sse = max(0.0, syy * (1.0 - r2))
    se_beta = math.sqrt(sse / df / sxx)
    t_stat = beta / se_beta if se_beta > 0 else math.copysign(math.inf, beta)
    return OlsFit(alpha, beta, beta_std, r2, se_beta, t_stat, two_sided_p(t_stat, df), n, residuals)


@dataclass(frozen=True)
class LagRegressionResult:
    lexicon_label: str
    k: int
    fit: OlsFit


def lag_sweep(x: DailySeries, y: DailySeries, k_max: int, label: str | None = None) -> list[LagRegressionResult]:
    """Regress y_t on x_{t-k} for k = 0..k_max (x leads y by k days)."""
    if x.start_date != y.start_date or len(x) != len(y):
        raise DataError(f"series {x.label!r} and {y.label!r} are not on the same calendar")
    if k_max < 0:
        raise DataError("k_max must be >= 0")
    n = len(x)
    if n <= k_max + 2:
        raise DataError(f"series length {n} too short for k_max={k_max}")
    label = x.label if label is None else label
    out = []
    for k in range(k_max + 1):
        try:
            fit = ols_simple(x.values[: n - k], y.values[k:])
        except DataError as exc:
            raise DataError(f"{label} lag {k}: {exc}") from exc
        out.append(LagRegressionResult(label, k, fit))
    return out


def lag_table_csv(results: Iterable[LagRegressionResult]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lexicon", "k", "beta_std", "r2", "p_value", "n"])
    for r in results:
        w.writerow([r.lexicon_label, r.k, repr(r.fit.beta_std), repr(r.fit.r2), format_p(r.fit.p_value), r.fit.n])
    return buf.getvalue()


@dataclass(frozen=True)
class PairCheck:
    label: str
    k: int
    beta_std: float
    r2: float
    exact_match: bool
    consistent: bool


def check_r2_consistency(rows: Iterable[tuple[str, int, float, float]], decimals: int = 2) -> list[PairCheck]:
    """Check printed (beta_std, r2) pairs against r2 = beta_std**2.

    Both numbers are assumed rounded to ``decimals`` places. A pair is
    consistent when some true slope that rounds to the printed beta has a
    square that rounds to the printed r2. ``exact_match`` is the naive
    test ``r2 == round(beta**2, decimals)``.
    """
    half = 0.5 * 10.0**-decimals
    eps = 1e-12
    out = []
    for label, k, b, r2 in rows:
        lo = max(0.0, abs(b) - half)
        hi = abs(b) + half
        consistent = lo * lo - half - eps <= r2 <= hi * hi + half + eps
        exact = abs(round(b * b + eps, decimals) - r2) < eps
        out.append(PairCheck(label, int(k), float(b), float(r2), exact, consistent))
    return out


def load_reference_lag_table() -> list[tuple[str, int, float, float]]:
    """The printed (lexicon, lag, beta_std, r2) table bundled with the package."""
    from importlib import resources

    text = resources.files("sentibreak.data").joinpath("reference_lag_table.tsv").read_text("utf-8")
    lines = [l for l in text.splitlines() if l.strip() and not l.startswith("#")]
    header = lines[0].split("\t")
    labels = header[1:]
    rows = []
    for line in lines[1:]:
        cells = line.split("\t")
        k = int(cells[0])
        for j in range(0, len(labels), 2):
            rows.append((labels[j].split(":")[0], k, float(cells[1 + j]), float(cells[2 + j])))
    return rows


@dataclass(frozen=True)
class MannWhitneyResult:
    u_a: float
    u_b: float
    p_value: float
    method: str
    degenerate: bool = False


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with tied values sharing the average of their ranks."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(v.size)
    sv = v[order]
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_p(ranks: np.ndarray, na: int, u_obs: float) -> float:
    nb = ranks.size - na
    mu = na * nb / 2.0
    dev = abs(u_obs - mu) - 1e-9
    hits = 0
    total = 0
    combos = itertools.combinations(range(ranks.size), na)
    while True:
        chunk = np.array(list(itertools.islice(combos, 65536)), dtype=np.intp)
        if chunk.size == 0:
            break
        chunk = chunk.reshape(-1, na)
        u = ranks[chunk].sum(axis=1) - na * (na + 1) / 2.0
        hits += int(np.count_nonzero(np.abs(u - mu) >= dev))
        total += chunk.shape[0]
    return hits / total


def mann_whitney(a: Sequence[float], b: Sequence[float], mode: str = "auto") -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test of sample ``a`` against ``b``.

    mode ``auto`` enumerates the permutation distribution when the pooled
    size is at most 16 and otherwise uses the normal approximation with
    continuity correction and tie-corrected variance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.size, b.size
    if na < 1 or nb < 1:
        raise DataError("both samples need at least one value")
    if mode not in ("auto", "exact", "approx"):
        raise DataError(f"unknown mode {mode!r}")
    pooled = np.concatenate([a, b])
    ranks = midranks(pooled)
    u_a = float(ranks[:na].sum() - na * (na + 1) / 2.0)
    u_b = na * nb - u_a
    if np.all(pooled == pooled[0]):
        return MannWhitneyResult(u_a, u_b, 1.0, "exact" if mode == "exact" else "approx", degenerate=True)
    N = na + nb
    use_exact = mode == "exact" or (mode == "auto" and N <= EXACT_MAX_POOLED)
    if use_exact:
        if math.comb(N, na) > 5_000_000:
            raise DataError(f"exact enumeration of C({N},{na}) labelings is too large")
        p = _exact_p(ranks, na, u_a)
        return MannWhitneyResult(u_a, u_b, min(1.0, p), "exact")
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts.astype(float) ** 3 - counts)) / (N * (N - 1))
    var = na * nb / 12.0 * ((N + 1) - tie_term)
    dev = max(0.0, abs(u_a - na * nb / 2.0) - 0.5)
    z = dev / math.sqrt(var)
    p = float(special.erfc(z / math.sqrt(2.0)))
    return MannWhitneyResult(u_a, u_b, min(1.0, max(P_FLOOR, p)), "approx")
