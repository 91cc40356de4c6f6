"""Ranking metrics, month-by-month evaluation and the sequential latency harness."""
from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

REALTIME_BUDGET_MS = 500.0
REALTIME_BATCH = 50


class DegenerateLabels(ValueError):
    """Metric needs at least one positive and one negative sample."""


class InsufficientUrls(ValueError):
    pass


@dataclass(frozen=True)
class ScoredSample:
    score: float
    label: bool
    first_seen: datetime | None = None


def _arrays(samples):
    scores = np.array([s.score for s in samples], dtype=np.float64)
    labels = np.array([bool(s.label) for s in samples])
    return scores, labels


def roc_auc_scores(scores, labels) -> float:
    """Mann-Whitney U / (P*N) with ties counted as one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if not np.all(np.isfinite(scores)):
        raise ValueError("non-finite score")
    P = int(labels.sum())
    N = len(labels) - P
    if P == 0 or N == 0:
        raise DegenerateLabels(f"need both classes, got {P} positives and {N} negatives")
    ranks = rankdata(scores)  # average ranks for ties; half-integers sum exactly
    u = ranks[labels].sum() - P * (P + 1) / 2
    return float(u / (P * N))


def roc_auc(samples: Sequence[ScoredSample]) -> float:
    return roc_auc_scores(*_arrays(samples))


def allowed_false_positives(fpr: float, n_neg: int) -> int:
    # tolerate float noise such as 0.29 * 100 == 28.999999999999996
    return int(math.floor(fpr * n_neg + 1e-9))


def recall_at_fpr_scores(scores, labels, fpr: float) -> float:
    """Recall at the loosest threshold that lets through at most floor(fpr*N) negatives.

    With negatives sorted descending, a threshold admits at most k of them
    iff it lies strictly above the (k+1)-th highest negative score.
    """
    if not 0 < fpr < 1:
        raise ValueError("fpr must be in (0, 1)")
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    pos, neg = scores[labels], scores[~labels]
    if len(pos) == 0 or len(neg) == 0:
        raise DegenerateLabels(f"need both classes, got {len(pos)} positives and {len(neg)} negatives")
    k = allowed_false_positives(fpr, len(neg))
    if k >= len(neg):
        return 1.0
    bar = np.sort(neg)[::-1][k]
    return float((pos > bar).sum() / len(pos))


def recall_at_fpr(samples: Sequence[ScoredSample], fpr: float) -> float:
    scores, labels = _arrays(samples)
    return recall_at_fpr_scores(scores, labels, fpr)


@dataclass
class MonthMetrics:
    month: str  # YYYY-MM
    n: int
    auc: float | None
    recall_at_1pct: float | None
    recall_at_01pct: float | None = None


def month_key(ts) -> str:
    if isinstance(ts, (int, np.integer)):
        ts = datetime.fromtimestamp(int(ts), tz=timezone.utc)
    return ts.astimezone(timezone.utc).strftime("%Y-%m")


def degradation_from_scores(scores, labels, first_seen) -> list[MonthMetrics]:
    """Per calendar month (UTC) metrics in chronological order; None where a month lacks a class."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    keys = np.array([month_key(t) for t in first_seen])
    out = []
    for month in sorted(set(keys.tolist())):
        sel = keys == month
        s, y = scores[sel], labels[sel]
        try:
            auc = roc_auc_scores(s, y)
            r1 = recall_at_fpr_scores(s, y, 0.01)
            r01 = recall_at_fpr_scores(s, y, 0.001)
        except DegenerateLabels:
            auc = r1 = r01 = None
        out.append(MonthMetrics(month, int(sel.sum()), auc, r1, r01))
    return out


def monthly_degradation(model, test) -> list[MonthMetrics]:
    """Score a FeatureBatch with ``model`` and split the metrics by month."""
    from .nn.train import predict_in_chunks

    p_mal, _ = predict_in_chunks(model, test)
    return degradation_from_scores(p_mal, test.is_malicious, test.first_seen)


def write_degradation_csv(path, rows: Iterable[MonthMetrics]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "n", "auc", "recall_at_1pct"])
        for r in rows:
            w.writerow([r.month, r.n, _fmt(r.auc), _fmt(r.recall_at_1pct)])


def _fmt(x):
    return "" if x is None else f"{x:.6f}"


@dataclass
class LatencyReport:
    latencies_ms: list
    median_ms: float
    mean_ms: float
    p99_ms: float
    sequential_50_total_ms: float

    @property
    def realtime(self) -> bool:
        return self.sequential_50_total_ms < REALTIME_BUDGET_MS

    def summary(self) -> str:
        return (f"urls={len(self.latencies_ms)} median_ms={self.median_ms:.3f} mean_ms={self.mean_ms:.3f} "
                f"p99_ms={self.p99_ms:.3f} sequential_50_total_ms={self.sequential_50_total_ms:.3f} "
                f"realtime={str(self.realtime).lower()}")

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "latency_ms"])
            for i, v in enumerate(self.latencies_ms):
                w.writerow([i, f"{v:.6f}"])
            fh.write(f"# {self.summary()}\n")


def latency_bench(classify, urls: Sequence[str], warmup: int = 5) -> LatencyReport:
    """Time ``classify(url)`` one URL at a time, end to end.

    ``classify`` must do tokenization, feature extraction (DNS from cache)
    and the forward pass; see :meth:`urlguard.pipeline.UrlClassifier.classify`.
    """
    if len(urls) < REALTIME_BATCH:
        raise InsufficientUrls(f"need at least {REALTIME_BATCH} URLs, got {len(urls)}")
    for u in urls[:warmup]:
        classify(u)
    lat = []
    for u in urls:
        t0 = time.perf_counter()
        classify(u)
        lat.append((time.perf_counter() - t0) * 1000.0)
    arr = np.array(lat)
    return LatencyReport(
        latencies_ms=lat,
        median_ms=float(statistics.median(lat)),
        mean_ms=float(arr.mean()),
        p99_ms=float(np.percentile(arr, 99)),
        sequential_50_total_ms=float(arr[:REALTIME_BATCH].sum()),
    )
