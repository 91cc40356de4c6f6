import math
import random
from collections import Counter
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_labels
from urlguard.errors import EmptyCalibration, MalformedRow
from urlguard.labeling import (DEFAULT_CUTOFF, LabelingConfig, UrlVerdictSummary, Verdict, VerdictRecord, VendorMetrics,
                               add_months, aggregate_verdicts, assign_label, build_calibration_set,
                               filter_reputation_window, label_corpus, load_verdicts, power_mean, quality_score,
                               select_high_quality, temporal_split, vendor_metrics, write_metrics, write_verdicts)
from urlguard.url_core import Label, UrlRecord

UTC = timezone.utc
T0 = datetime(2022, 6, 1, tzinfo=UTC)


def summary(url, **verdicts):
    return UrlVerdictSummary(url, {k: Verdict(v) for k, v in verdicts.items()}, T0)


def test_aggregate_counts():
    recs = [VerdictRecord("u1", "v1", Verdict.PHISHING, T0), VerdictRecord("u1", "v2", Verdict.CLEAN, T0),
            VerdictRecord("u2", "v1", Verdict.SUSPICIOUS, T0 + timedelta(days=1)),
            VerdictRecord("u2", "v2", Verdict.UNRATED, T0)]
    s = {x.url: x for x in aggregate_verdicts(recs)}
    assert s["u1"].non_safe_count == 1
    assert s["u2"].non_safe_count == 0
    assert s["u2"].first_seen == T0


def test_aggregate_matches_group_by():
    rng = random.Random(0)
    recs = [VerdictRecord(f"u{rng.randrange(20)}", f"v{rng.randrange(5)}", rng.choice(list(Verdict)),
                          T0 + timedelta(hours=rng.randrange(100))) for _ in range(100)]
    latest = {}
    for r in recs:
        latest[(r.url, r.vendor)] = r.verdict
    for s in aggregate_verdicts(recs):
        want = sum(1 for (u, _), v in latest.items() if u == s.url and v.value in ("malicious", "phishing"))
        assert s.non_safe_count == want
        assert s.first_seen == min(r.first_seen for r in recs if r.url == s.url)


def test_calibration_threshold():
    cfg = LabelingConfig()
    nine = summary("a", **{f"v{i}": "phishing" for i in range(9)})
    split = summary("b", **{f"v{i}": "phishing" for i in range(8)}, **{f"w{i}": "malicious" for i in range(8)})
    cal = build_calibration_set([nine, split], cfg)
    assert cal == [nine]
    assert nine.majority_tag() == (Verdict.PHISHING, 9)
    assert build_calibration_set([], cfg) == []


def test_tied_majority_excluded_from_calibration():
    tied = summary("c", **{f"v{i}": "phishing" for i in range(9)}, **{f"w{i}": "malicious" for i in range(9)})
    assert tied.majority_tag() == (None, 9)
    assert build_calibration_set([tied], LabelingConfig()) == []


def test_vendor_metrics_by_hand():
    cfg = LabelingConfig(calibration_min_detections=2)
    s = [summary("a", v1="phishing", v2="phishing", v3="clean"),
         summary("b", v1="malicious", v2="malicious", v3="malicious"),
         summary("c", v1="clean", v2="clean", v3="phishing"),
         summary("d", v1="clean", v2="clean", v3="clean")]
    cal = build_calibration_set(s, cfg)
    m = {x.vendor: x for x in vendor_metrics(s, cal, cfg)}
    assert (m["v1"].detection_rate, m["v1"].coverage) == (1.0, pytest.approx(2 / 3))
    assert (m["v3"].detection_rate, m["v3"].coverage) == (0.5, pytest.approx(2 / 3))
    assert m["v1"].quality == pytest.approx((1 + 2 / 3) / 2)


def test_vendor_metrics_empty_calibration():
    with pytest.raises(EmptyCalibration):
        vendor_metrics([summary("a", v1="clean")], [], LabelingConfig())


def test_power_mean_family():
    assert power_mean(0.9, 0.1, 1.0) == pytest.approx(0.5)
    assert power_mean(0.9, 0.1, 0.0) == pytest.approx(0.3)
    assert power_mean(0.9, 0.1, 2.0) == pytest.approx(((0.81 + 0.01) / 2) ** 0.5)
    assert power_mean(0.0, 0.5, -1.0) == 0.0
    assert quality_score(0.9, 0.1, LabelingConfig(quality_scale=3.0)) == pytest.approx(1.5)


@settings(max_examples=500)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(-3, 3))
def test_power_mean_between_min_and_max(a, b, p):
    m = power_mean(a, b, p)
    assert min(a, b) - 1e-12 <= m <= max(a, b) + 1e-12


def test_power_mean_extreme_inputs():
    assert power_mean(1.5e-68, 9e-259, 1.0) == pytest.approx(0.75e-68, rel=1e-12)
    assert power_mean(1.0, 9e-259, -2.0) == pytest.approx(math.sqrt(2) * 9e-259, rel=1e-12)
    assert power_mean(0.3, 0.7, 1e-300) == pytest.approx(math.sqrt(0.21), rel=1e-12)


def _metrics(**q):
    return {v: VendorMetrics(v, 0.95, 0.5, x) for v, x in q.items()}


def test_two_hq_unanimous_above_threshold_labels():
    cfg = LabelingConfig(quality_threshold=2.5)
    m = _metrics(a=1.3, b=1.3, c=0.2)
    s = summary("u", a="phishing", b="phishing", c="clean", x="malicious")
    assert assign_label(s, {"a", "b", "c"}, m, cfg) is Label.PHISHING


def test_assign_label_rules():
    cfg = LabelingConfig()
    m = _metrics(a=1.3, b=1.3, c=0.2)
    hq = {"a", "b", "c"}
    # disagreement among HQ flags
    assert assign_label(summary("u", a="phishing", b="malicious"), hq, m, cfg) is None
    # only one HQ flag, however strong
    assert assign_label(summary("u", a="phishing", b="clean"), hq, _metrics(a=9.0, b=1.0), cfg) is None
    # unanimous but not enough quality
    assert assign_label(summary("u", a="malicious", c="malicious"), hq, m, cfg) is None
    # exactly at the threshold is not above it
    assert assign_label(summary("u", a="malicious", b="malicious"), hq, _metrics(a=1.25, b=1.25), cfg) is None
    # no HQ flags at all: benign, even with non-HQ flags
    assert assign_label(summary("u", a="clean", x="phishing"), hq, m, cfg) is Label.BENIGN


def test_suspicious_policy():
    m = _metrics(a=1.0, b=1.0)
    s = summary("u", a="suspicious", b="clean")
    assert assign_label(s, {"a", "b"}, m, LabelingConfig()) is Label.BENIGN
    assert assign_label(s, {"a", "b"}, m, LabelingConfig(suspicious_policy="drop")) is None


def test_select_high_quality_is_strict():
    cfg = LabelingConfig()
    ms = [VendorMetrics("a", 0.90, 0.5, 0), VendorMetrics("b", 0.91, 0.10, 0), VendorMetrics("c", 0.91, 0.11, 0)]
    assert select_high_quality(ms, cfg) == {"c"}


def test_config_validation():
    with pytest.raises(ValueError):
        LabelingConfig(quality_threshold=0)
    with pytest.raises(ValueError):
        LabelingConfig(suspicious_policy="maybe")


# -- randomized corpus vs brute force ----------------------------------------------


def random_verdict_table(rng, n_urls=1000, n_vendors=None):
    """{url: {vendor: verdict}} with heterogeneous vendor behaviour."""
    n_vendors = n_vendors or rng.randint(12, 30)
    vendors = []
    for i in range(n_vendors):
        vendors.append(dict(
            name=f"vendor{i:02d}",
            detect=rng.choice([0.98, 0.95, 0.9, 0.7, 0.4, 0.1]),
            confuse=rng.choice([0.0, 0.0, 0.05, 0.3]),
            fp=rng.choice([0.0, 0.01, 0.05]),
            suspicious=rng.choice([0.0, 0.05, 0.2]),
            present=rng.choice([1.0, 0.9, 0.5]),
        ))
    table = {}
    for u in range(n_urls):
        truth = rng.choices(["benign", "malicious", "phishing"], [0.5, 0.25, 0.25])[0]
        row = {}
        for v in vendors:
            if rng.random() > v["present"]:
                continue
            r = rng.random()
            if r < v["suspicious"]:
                row[v["name"]] = "suspicious"
            elif truth == "benign":
                row[v["name"]] = rng.choice(["malicious", "phishing"]) if rng.random() < v["fp"] else \
                    rng.choice(["clean", "clean", "unrated"])
            elif rng.random() < v["detect"]:
                other = "phishing" if truth == "malicious" else "malicious"
                row[v["name"]] = other if rng.random() < v["confuse"] else truth
            else:
                row[v["name"]] = rng.choice(["clean", "unrated"])
        table[f"http://u{u}.com/"] = row
    return table


def table_records(table):
    return [VerdictRecord(url, vendor, Verdict(v), T0) for url, row in table.items() for vendor, v in row.items()]


def labels_agree(table, cfg: LabelingConfig):
    """Compare assign_label on every row with the brute-force labeler; returns (mismatches, label counts)."""
    want, stats = brute_force_labels(
        table, cfg.calibration_min_detections, cfg.hq_detection_rate_min, cfg.hq_coverage_min,
        cfg.quality_threshold, cfg.power_mean_exponent, cfg.quality_scale)
    summaries = aggregate_verdicts(table_records(table))
    metrics = vendor_metrics(summaries, build_calibration_set(summaries, cfg), cfg)
    by_vendor = {m.vendor: m for m in metrics}
    for v, (dr, cov, q) in stats.items():
        m = by_vendor[v]
        assert (m.detection_rate, m.coverage) == (dr, cov)
        assert m.quality == pytest.approx(q, abs=1e-12)
    hq = select_high_quality(metrics, cfg)
    bad = []
    counts = Counter()
    for s in summaries:
        got = assign_label(s, hq, by_vendor, cfg)
        got = None if got is None else got.value
        counts[got] += 1
        if got != want[s.url]:
            bad.append(s.url)
    return bad, counts


@pytest.mark.parametrize("seed, cfg", [
    (11, LabelingConfig()),
    (10, LabelingConfig(power_mean_exponent=0.0, quality_threshold=1.5)),
    (10, LabelingConfig(power_mean_exponent=2.0, quality_scale=2.0, quality_threshold=3.0)),
    (10, LabelingConfig(calibration_min_detections=5, hq_detection_rate_min=0.8, quality_threshold=1.2)),
])
def test_assign_label_matches_brute_force(seed, cfg):
    bad, counts = labels_agree(random_verdict_table(random.Random(seed), 400), cfg)
    assert bad == []
    # the instance must exercise every outcome, or agreement proves little
    assert set(counts) == {"benign", "malware", "phishing", None}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_brute_force_agreement_property(seed):
    table = random_verdict_table(random.Random(seed), 60, n_vendors=14)
    cfg = LabelingConfig(calibration_min_detections=3, quality_threshold=1.5)
    try:
        bad, _ = labels_agree(table, cfg)
    except EmptyCalibration:
        return
    assert bad == []


def test_label_corpus_end_to_end():
    table = random_verdict_table(random.Random(9), 300)
    labeled, metrics = label_corpus(table_records(table), LabelingConfig())
    want, _ = brute_force_labels(table)
    assert {r.url: r.label.value for r in labeled} == {u: v for u, v in want.items() if v is not None}
    assert len(metrics) == len({v for row in table.values() for v in row})


def test_label_corpus_empty():
    assert label_corpus([], LabelingConfig()) == ([], [])


def test_verdict_and_metric_files(tmp_path):
    recs = table_records(random_verdict_table(random.Random(2), 20))
    write_verdicts(tmp_path / "v.csv", recs)
    assert load_verdicts(tmp_path / "v.csv") == recs
    write_metrics(tmp_path / "m.csv", [VendorMetrics("x", 0.5, 0.25, 0.375)])
    assert (tmp_path / "m.csv").read_text().splitlines() == [
        "vendor,detection_rate,coverage,quality", "x,0.500000,0.250000,0.375000"]


def test_load_verdicts_rejects_unknown_tag(tmp_path):
    p = tmp_path / "v.csv"
    p.write_text("url,vendor,verdict,first_seen\nhttp://a.com/,v1,clean,2022-01-01T00:00:00Z\n"
                 "http://a.com/,v2,spam,2022-01-01T00:00:00Z\n", encoding="utf-8")
    with pytest.raises(MalformedRow) as exc:
        load_verdicts(p)
    assert exc.value.line == 3


# -- time handling ---------------------------------------------------------------------


def test_add_months_clamps_day():
    assert add_months(datetime(2022, 3, 31, tzinfo=UTC), -1) == datetime(2022, 2, 28, tzinfo=UTC)
    assert add_months(datetime(2022, 11, 15, tzinfo=UTC), 3) == datetime(2023, 2, 15, tzinfo=UTC)


def test_reputation_window():
    rec = lambda d: UrlRecord(f"http://x{d.day}.com/", Label.BENIGN, d)  # noqa: E731
    collected = datetime(2022, 11, 1, tzinfo=UTC)
    recs = [rec(datetime(2022, 8, 30, tzinfo=UTC)), rec(datetime(2022, 9, 1, tzinfo=UTC)),
            rec(datetime(2022, 9, 2, tzinfo=UTC))]
    assert [r.first_seen.day for r in filter_reputation_window(recs, collected)] == [30, 1]


def test_temporal_split_at_cutoff():
    before = UrlRecord("http://a.com/", Label.BENIGN, DEFAULT_CUTOFF - timedelta(seconds=1))
    at = UrlRecord("http://b.com/", Label.BENIGN, DEFAULT_CUTOFF)
    train, test = temporal_split([at, before])
    assert train == [before] and test == [at]
    assert DEFAULT_CUTOFF == datetime(2022, 9, 1, tzinfo=UTC)
