"""Least-squares segmentation into constant-mean regimes.

For every candidate number of breaks ``m`` the globally optimal break
placement is found by dynamic programming over segment residual sums of
squares; the number of breaks is then chosen by minimum BIC.

Breakpoints are 1-based indices of the *last* observation of each
segment, so a breakpoint ``b`` means the new regime starts at
observation ``b + 1``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Sequence

import numpy as np

from sentibreak.errors import DataError

DEFAULT_TRIM = 0.15
DEFAULT_M_MAX = 5
# relative slack under which two placements count as tied
TIE_RTOL = 1e-12


def default_h_min(n: int, trim: float = DEFAULT_TRIM) -> int:
    return max(1, math.ceil(trim * n - 1e-9))


class SegmentCosts:
    """O(1) segment RSS lookups from prefix sums of y and y**2.

    The series is centered on its mean first; this keeps the prefix-sum
    difference well conditioned and makes costs shift invariant.
    """

    def __init__(self, y: Sequence[float]):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise DataError("segmentation needs a non-empty 1-D series")
        if not np.all(np.isfinite(y)):
            raise DataError("series contains non-finite values")
        self.n = y.size
        yc = y - y.mean()
        self._s1 = np.concatenate(([0.0], np.cumsum(yc)))
        self._s2 = np.concatenate(([0.0], np.cumsum(yc * yc)))

    def cost(self, i: int, j: int) -> float:
        """RSS of a constant fit to observations i..j (1-based, inclusive)."""
        if not 1 <= i <= j <= self.n:
            raise DataError(f"bad segment [{i}, {j}] for n={self.n}")
        s = self._s1[j] - self._s1[i - 1]
        q = self._s2[j] - self._s2[i - 1]
        return max(0.0, float(q - s * s / (j - i + 1)))

    def matrix(self) -> np.ndarray:
        """``C[i, j]`` = cost(i, j) for 1 <= i <= j <= n, +inf elsewhere."""
        n = self.n
        i = np.arange(n + 2)[:, None]
        j = np.arange(n + 2)[None, :]
        valid = (i >= 1) & (j >= i) & (j <= n)
        ii = np.clip(i, 1, n)
        jj = np.clip(j, 1, n)
        length = np.where(valid, jj - ii + 1, 1)
        s = self._s1[jj] - self._s1[ii - 1]
        q = self._s2[jj] - self._s2[ii - 1]
        c = np.maximum(q - s * s / length, 0.0)
        return np.where(valid, c, np.inf)


def segment_cost(y: Sequence[float], i: int, j: int) -> float:
    return SegmentCosts(y).cost(i, j)


def _suffix_tables(costs: np.ndarray, n: int, h: int, segments: int) -> np.ndarray:
    """``G[k, i]`` = least RSS splitting observations i..n into k segments."""
    G = np.full((segments + 1, n + 2), np.inf)
    G[0, n + 1] = 0.0
    for k in range(1, segments + 1):
        for i in range(1, n - k * h + 2):
            # last index j of the first segment; the rest needs (k-1)*h points
            j = np.arange(i + h - 1, n - (k - 1) * h + 1)
            G[k, i] = np.min(costs[i, j] + G[k - 1, j + 1])
    return G


def _trace(costs: np.ndarray, G: np.ndarray, n: int, h: int, m: int) -> list[int]:
    """Lexicographically smallest breakpoint list attaining ``G[m+1, 1]``."""
    tol = TIE_RTOL * max(costs[1, n], np.finfo(float).tiny)
    breaks = []
    i = 1
    for k in range(m + 1, 1, -1):
        j = np.arange(i + h - 1, n - (k - 1) * h + 1)
        total = costs[i, j] + G[k - 1, j + 1]
        first = int(np.flatnonzero(total <= G[k, i] + tol)[0])
        bp = int(j[first])
        breaks.append(bp)
        i = bp + 1
    return breaks


def _check_feasible(n: int, m: int, h: int) -> None:
    if h < 1:
        raise DataError("h_min must be >= 1")
    if m < 0:
        raise DataError("number of breaks must be >= 0")
    if (m + 1) * h > n:
        raise DataError(f"infeasible: {m} breaks with segments >= {h} need n >= {(m + 1) * h}, got {n}")


def _rss_of(sc: SegmentCosts, breaks: Sequence[int]) -> float:
    edges = [0, *breaks, sc.n]
    return math.fsum(sc.cost(a + 1, b) for a, b in zip(edges, edges[1:]))


def optimal_breakpoints(y: Sequence[float], m: int, h_min: int) -> tuple[list[int], float]:
    """Globally RSS-optimal placement of ``m`` breaks, segments >= ``h_min``."""
    sc = SegmentCosts(y)
    _check_feasible(sc.n, m, h_min)
    costs = sc.matrix()
    G = _suffix_tables(costs, sc.n, h_min, m + 1)
    breaks = _trace(costs, G, sc.n, h_min, m)
    return breaks, _rss_of(sc, breaks)


def bic_value(n: int, rss: float, m: int) -> float:
    if rss <= 0:
        return -math.inf
    return n * math.log(rss / n) + (2 * m + 1) * math.log(n)


@dataclass(frozen=True)
class MSolution:
    m: int
    breakpoints: list[int]
    rss: float
    bic: float


@dataclass(frozen=True)
class SegmentationResult:
    n: int
    h_min: int
    per_m: list[MSolution]
    chosen_m: int
    label: str = ""
    values: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def chosen(self) -> MSolution:
        return self.per_m[self.chosen_m]

    def segment_means(self, m: int | None = None) -> np.ndarray:
        """Fitted piecewise-constant mean for each observation."""
        sol = self.per_m[self.chosen_m if m is None else m]
        edges = [0, *sol.breakpoints, self.n]
        fitted = np.empty(self.n)
        for a, b in zip(edges, edges[1:]):
            fitted[a:b] = self.values[a:b].mean()
        return fitted

    def to_dict(self, start_date: date | None = None) -> dict:
        """JSON-ready summary. ``break_dates`` are the first days of the new
        regimes (observation ``bp + 1``) when ``start_date`` is given."""
        per_m = []
        for s in self.per_m:
            entry = {
                "m": s.m,
                "breakpoints": list(s.breakpoints),
                "break_dates": (
                    [(start_date + timedelta(days=bp)).isoformat() for bp in s.breakpoints]
                    if start_date is not None
                    else None
                ),
                "rss": s.rss,
                "bic": s.bic if math.isfinite(s.bic) else "-inf",
            }
            per_m.append(entry)
        return {"label": self.label, "n": self.n, "h_min": self.h_min, "per_m": per_m, "chosen_m": self.chosen_m}

    def curve_csv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "rss", "bic"])
        for s in self.per_m:
            w.writerow([s.m, repr(s.rss), repr(s.bic) if math.isfinite(s.bic) else "-inf"])
        return buf.getvalue()

    def fit_csv(self, start_date: date) -> str:
        fitted = self.segment_means()
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "value", "segment_mean"])
        for t in range(self.n):
            w.writerow([(start_date + timedelta(days=t)).isoformat(), repr(float(self.values[t])), repr(float(fitted[t]))])
        return buf.getvalue()


def select_m_bic(
    y: Sequence[float], m_max: int = DEFAULT_M_MAX, h_min: int | None = None, label: str = ""
) -> SegmentationResult:
    """Optimal breakpoints for m = 0..m_max and the BIC-minimizing m.

    BIC(m) = n ln(rss_m / n) + (2m + 1) ln n. A zero rss gives -inf.
    Ties go to the smaller m.
    """
    y = np.asarray(y, dtype=float)
    sc = SegmentCosts(y)
    n = sc.n
    h = default_h_min(n) if h_min is None else h_min
    _check_feasible(n, m_max, h)
    costs = sc.matrix()
    G = _suffix_tables(costs, n, h, m_max + 1)
    per_m = []
    for m in range(m_max + 1):
        bps = _trace(costs, G, n, h, m)
        rss = _rss_of(sc, bps)
        per_m.append(MSolution(m, bps, rss, bic_value(n, rss, m)))
    bics = [s.bic for s in per_m]
    chosen = min(range(len(bics)), key=lambda m: (bics[m], m))
    y_ro = y.copy()
    y_ro.setflags(write=False)
    return SegmentationResult(n, h, per_m, chosen, label, y_ro)
