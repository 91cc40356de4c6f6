"""Vendor-verdict labeling, reputation-window filtering and the temporal split."""
from __future__ import annotations

import calendar
import csv
import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .errors import EmptyCalibration, MalformedRow
from .url_core import Label, UrlRecord, format_timestamp, iter_csv_rows, parse_timestamp

DEFAULT_CUTOFF = datetime(2022, 9, 1, tzinfo=timezone.utc)


class Verdict(str, enum.Enum):
    CLEAN = "clean"
    UNRATED = "unrated"
    MALICIOUS = "malicious"
    PHISHING = "phishing"
    SUSPICIOUS = "suspicious"

    @property
    def non_safe(self) -> bool:
        # "suspicious" overlaps safe and non-safe usage, so it never counts
        return self in (Verdict.MALICIOUS, Verdict.PHISHING)

    @property
    def label(self) -> Label:
        return {Verdict.MALICIOUS: Label.MALWARE, Verdict.PHISHING: Label.PHISHING}[self]


@dataclass(frozen=True)
class VerdictRecord:
    url: str
    vendor: str
    verdict: Verdict
    first_seen: datetime


@dataclass
class UrlVerdictSummary:
    url: str
    verdicts: dict = field(default_factory=dict)  # vendor -> Verdict
    first_seen: datetime | None = None

    @property
    def non_safe_count(self) -> int:
        return sum(v.non_safe for v in self.verdicts.values())

    def majority_tag(self) -> tuple[Verdict | None, int]:
        """Most common non-safe tag and its vendor count; tag is None on a tie or no flags."""
        counts = Counter(v for v in self.verdicts.values() if v.non_safe)
        if not counts:
            return None, 0
        ranked = counts.most_common()
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            return None, ranked[0][1]
        return ranked[0]


@dataclass(frozen=True)
class VendorMetrics:
    vendor: str
    detection_rate: float
    coverage: float
    quality: float


@dataclass
class LabelingConfig:
    calibration_min_detections: int = 9
    hq_detection_rate_min: float = 0.90
    hq_coverage_min: float = 0.10
    quality_threshold: float = 2.5
    power_mean_exponent: float = 1.0
    quality_scale: float = 1.0
    suspicious_policy: str = "ignore"  # ignore | drop

    def __post_init__(self):
        for name in ("calibration_min_detections", "hq_detection_rate_min", "hq_coverage_min",
                     "quality_threshold", "quality_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.suspicious_policy not in ("ignore", "drop"):
            raise ValueError(f"unknown suspicious_policy {self.suspicious_policy!r}")


def power_mean(a: float, b: float, p: float) -> float:
    if a == 0 or b == 0:
        if p <= 0:
            return 0.0
        return ((a ** p + b ** p) / 2) ** (1 / p)
    if p == 0:
        return math.sqrt(a * b)
    u, v = p * math.log(a), p * math.log(b)
    if max(abs(u), abs(v)) < 1:
        # near p = 0 a**p + b**p cancels badly; expm1/log1p keep the precision
        t = (math.expm1(u) + math.expm1(v)) / 2
        return math.exp(math.log1p(t) / p)
    # log-sum-exp avoids overflow and underflow for large |p * log x|
    hi = max(u, v)
    return math.exp((hi + math.log1p(math.exp(-abs(u - v))) - math.log(2)) / p)


def quality_score(detection_rate: float, coverage: float, cfg: LabelingConfig) -> float:
    return cfg.quality_scale * power_mean(detection_rate, coverage, cfg.power_mean_exponent)


def aggregate_verdicts(records: Iterable[VerdictRecord]) -> list[UrlVerdictSummary]:
    by_url: dict[str, UrlVerdictSummary] = {}
    for r in records:
        s = by_url.get(r.url)
        if s is None:
            s = by_url[r.url] = UrlVerdictSummary(r.url)
        s.verdicts[r.vendor] = r.verdict
        if s.first_seen is None or r.first_seen < s.first_seen:
            s.first_seen = r.first_seen
    return list(by_url.values())


def build_calibration_set(summaries: Iterable[UrlVerdictSummary], cfg: LabelingConfig) -> list[UrlVerdictSummary]:
    out = []
    for s in summaries:
        tag, n = s.majority_tag()
        if tag is not None and n >= cfg.calibration_min_detections:
            out.append(s)
    return out


def vendor_metrics(summaries: Sequence[UrlVerdictSummary], calibration: Sequence[UrlVerdictSummary],
                   cfg: LabelingConfig, vendors: Iterable[str] | None = None) -> list[VendorMetrics]:
    if not calibration:
        raise EmptyCalibration("calibration set is empty")
    if vendors is None:
        vendors = sorted({v for s in summaries for v in s.verdicts})
    population = [s for s in summaries if s.non_safe_count > 0]
    truth = [(s, s.majority_tag()[0]) for s in calibration]
    out = []
    for vendor in vendors:
        hits = sum(s.verdicts.get(vendor) == tag for s, tag in truth)
        flagged = sum(1 for s in population if (v := s.verdicts.get(vendor)) is not None and v.non_safe)
        dr = hits / len(truth)
        cov = flagged / len(population) if population else 0.0
        out.append(VendorMetrics(vendor, dr, cov, quality_score(dr, cov, cfg)))
    return out


def select_high_quality(metrics: Iterable[VendorMetrics], cfg: LabelingConfig) -> set[str]:
    return {m.vendor for m in metrics
            if m.detection_rate > cfg.hq_detection_rate_min and m.coverage > cfg.hq_coverage_min}


def assign_label(summary: UrlVerdictSummary, hq: set[str], metrics: dict[str, VendorMetrics],
                 cfg: LabelingConfig) -> Label | None:
    """Label for one URL, or None when it is ambiguous and should be dropped."""
    flags = [(vendor, v) for vendor, v in summary.verdicts.items() if vendor in hq and v.non_safe]
    if not flags:
        if cfg.suspicious_policy == "drop" and any(
                vendor in hq and v is Verdict.SUSPICIOUS for vendor, v in summary.verdicts.items()):
            return None
        return Label.BENIGN
    tags = {v for _, v in flags}
    if len(tags) != 1 or len(flags) < 2:
        return None
    total = sum(metrics[vendor].quality for vendor, _ in flags)
    if total > cfg.quality_threshold:
        return tags.pop().label
    return None


def label_corpus(records: Iterable[VerdictRecord], cfg: LabelingConfig):
    """Run the whole labeling pass. Returns (labeled UrlRecords, vendor metrics)."""
    summaries = aggregate_verdicts(records)
    if not summaries:
        return [], []
    calibration = build_calibration_set(summaries, cfg)
    metrics = vendor_metrics(summaries, calibration, cfg)
    by_vendor = {m.vendor: m for m in metrics}
    hq = select_high_quality(metrics, cfg)
    labeled = []
    for s in summaries:
        label = assign_label(s, hq, by_vendor, cfg)
        if label is not None:
            labeled.append(UrlRecord(s.url, label, s.first_seen))
    return labeled, metrics


def add_months(ts: datetime, months: int) -> datetime:
    """Calendar-month shift, clamping the day to the target month's length."""
    idx = ts.year * 12 + (ts.month - 1) + months
    year, month = divmod(idx, 12)
    month += 1
    day = min(ts.day, calendar.monthrange(year, month)[1])
    return ts.replace(year=year, month=month, day=day)


def filter_reputation_window(records: Iterable[UrlRecord], collection_time: datetime, months: int = 2) -> list:
    """Drop records too recent for vendors to have built a reputation for them."""
    limit = add_months(collection_time, -months)
    return [r for r in records if r.first_seen <= limit]


def temporal_split(records: Iterable, cutoff: datetime = DEFAULT_CUTOFF) -> tuple[list, list]:
    train, test = [], []
    for r in records:
        (train if r.first_seen < cutoff else test).append(r)
    return train, test


def load_verdicts(path) -> list[VerdictRecord]:
    out = []
    for line, row in iter_csv_rows(path):
        try:
            out.append(VerdictRecord(
                row["url"], row["vendor"], Verdict(row["verdict"].strip().lower()), parse_timestamp(row["first_seen"])
            ))
        except (KeyError, ValueError, AttributeError) as exc:
            raise MalformedRow(line, str(exc)) from exc
    return out


def write_verdicts(path, records: Iterable[VerdictRecord]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["url", "vendor", "verdict", "first_seen"])
        for r in records:
            w.writerow([r.url, r.vendor, r.verdict.value, format_timestamp(r.first_seen)])


def write_metrics(path, metrics: Iterable[VendorMetrics]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vendor", "detection_rate", "coverage", "quality"])
        for m in metrics:
            w.writerow([m.vendor, f"{m.detection_rate:.6f}", f"{m.coverage:.6f}", f"{m.quality:.6f}"])
