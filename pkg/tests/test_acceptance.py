"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Criterion 5 trains nine desk-scale models (three seeds by three variants) on
one core and takes about 11 minutes; criterion 6 reuses one of them.
"""
import csv
import random
import string
import time
from itertools import product

import numpy as np
import pytest

from test_benchmark import metric_mismatches
from test_dns import index_matches_linear_scan
from test_labeling import labels_agree, random_verdict_table
from test_lexical import lexical_matches_oracle, random_urls
from test_nn import gradient_errors
from urlguard import synthetic
from urlguard.benchmark import degradation_from_scores, latency_bench, recall_at_fpr_scores, roc_auc_scores
from urlguard.cli import main
from urlguard.dns import DnsCache, DnsResponse, IpMetadataIndex, IpRange, build_dns_vocab, extract_dns
from urlguard.labeling import LabelingConfig, temporal_split
from urlguard.lexical import build_tld_vocab
from urlguard.nn import TrainConfig, UrlNetPlus, load_model, predict_in_chunks, save_model, train
from urlguard.pipeline import Featurizer, UrlClassifier
from urlguard.url_core import TldRegistry, parse_url

DESK_SIZE = 50_000
DESK_EPOCHS = 4
SEEDS = (0, 1, 2)


def report(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


# -- 1. curation -----------------------------------------------------------------------


def test_criterion_1_curation_counts_and_idempotence(capsys, tmp_path):
    case = synthetic.make_raw_curation_rows(10_000, seed=0)
    raw = tmp_path / "raw.csv"
    with open(raw, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["url", "label", "first_seen", "ips", "ttl"], lineterminator="\n")
        w.writeheader()
        w.writerows(case.rows)
    (tmp_path / "tld.txt").write_text("".join(s + "\n" for s in synthetic.REGISTRY_SUFFIXES))
    args = ["--set", f"tld_registry={tmp_path / 'tld.txt'}"]

    t0 = time.perf_counter()
    code = main(["curate", str(raw), "-o", str(tmp_path / "a.csv"), *args])
    seconds = time.perf_counter() - t0
    out = capsys.readouterr().out
    counts = {k: int(v) for k, v in (line.split() for line in out.strip().splitlines())}
    assert main(["curate", str(tmp_path / "a.csv"), "-o", str(tmp_path / "b.csv"), *args]) == 0
    again = {k: int(v) for k, v in (line.split() for line in capsys.readouterr().out.strip().splitlines())}

    exact = all(counts[k] == v for k, v in case.expected.items())
    idempotent = (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes() \
        and again["kept"] == again["read"] == counts["kept"]
    ok = code == 0 and exact and idempotent and seconds < 5.0
    report(capsys, "1 curation", ok,
           f"seeded={case.expected} got={{{', '.join(f'{k}: {counts[k]}' for k in case.expected)}}} "
           f"idempotent={idempotent} seconds={seconds:.2f} (<5)")


# -- 2. labeling -----------------------------------------------------------------------------


def test_criterion_2_labeling_matches_brute_force(capsys):
    results = []
    for seed, cfg in ((11, LabelingConfig()), (12, LabelingConfig(power_mean_exponent=0.0, quality_threshold=1.5)),
                      (13, LabelingConfig(quality_scale=3.0, hq_detection_rate_min=0.8))):
        bad, counts = labels_agree(random_verdict_table(random.Random(seed), n_urls=1000), cfg)
        results.append((seed, len(bad), dict(counts)))
    ok = all(n_bad == 0 for _, n_bad, _ in results)
    report(capsys, "2 labeling oracle", ok,
           "; ".join(f"seed {s}: {n} mismatches over 1000 urls {c}" for s, n, c in results))


# -- 3. metrics -----------------------------------------------------------------------------------


def test_criterion_3_metric_oracles(capsys):
    bad = metric_mismatches(n_instances=100, seed=0)
    report(capsys, "3 metric oracles", not bad, f"100 instances, mismatches beyond 1e-12: {bad[:3]}")


# -- 4. gradients -------------------------------------------------------------------------------------


def test_criterion_4_gradient_check(capsys):
    t0 = time.perf_counter()
    worst = {}
    for branch, mode in product(("attention", "conv"), ("binary", "multiclass")):
        errors = gradient_errors(branch, mode)
        name = max(errors, key=errors.get)
        worst[f"{branch}/{mode}"] = (name, errors[name])
    seconds = time.perf_counter() - t0
    ok = all(e < 1e-4 for _, e in worst.values()) and seconds < 60
    report(capsys, "4 gradient check", ok,
           " ".join(f"{k}: {n} {e:.1e}" for k, (n, e) in worst.items()) + f" seconds={seconds:.1f} (<60)")


# -- 5 and 6. desk-scale training ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def desk():
    t0 = time.perf_counter()
    corpus = synthetic.make_corpus(synthetic.CorpusSpec(n=DESK_SIZE, seed=0))
    registry, index = TldRegistry(corpus.suffixes), IpMetadataIndex(corpus.ranges)
    train_recs, test_recs = temporal_split(corpus.records)
    featurizer = Featurizer.build(train_recs, registry, index)
    x_train, x_test = featurizer.featurize(train_recs), featurizer.featurize(test_recs)
    runs = {}
    models = {}
    for seed in SEEDS:
        for use_dns, mode in ((True, "multiclass"), (False, "multiclass"), (True, "binary")):
            model = UrlNetPlus(featurizer.model_config(use_dns=use_dns), seed=seed)
            train(model, x_train, TrainConfig(epochs=DESK_EPOCHS, loss_mode=mode, seed=seed),
                  lex_count_mask=featurizer.lex_count_mask())
            p_train, _ = predict_in_chunks(model, x_train)
            p_test, _ = predict_in_chunks(model, x_test)
            runs[seed, use_dns, mode] = dict(
                train_auc=roc_auc_scores(p_train, x_train.is_malicious),
                test_auc=roc_auc_scores(p_test, x_test.is_malicious),
                recall_1pct=recall_at_fpr_scores(p_test, x_test.is_malicious, 0.01),
                months=degradation_from_scores(p_test, x_test.is_malicious, x_test.first_seen),
            )
            models[seed, use_dns, mode] = model
    return dict(corpus=corpus, featurizer=featurizer, x_test=x_test, test_recs=test_recs, runs=runs, models=models,
                seconds=time.perf_counter() - t0)


def _mean(desk, use_dns, mode, key):
    return float(np.mean([desk["runs"][s, use_dns, mode][key] for s in SEEDS]))


def test_criterion_5a_train_auc(capsys, desk):
    aucs = [desk["runs"][s, True, "multiclass"]["train_auc"] for s in SEEDS]
    ok = min(aucs) >= 0.95
    report(capsys, "5a train auc", ok,
           f"train AUC per seed {[round(a, 4) for a in aucs]} (>=0.95) after {DESK_EPOCHS} epochs; "
           f"all nine runs took {desk['seconds'] / 60:.1f} min")


def test_criterion_5b_dns_improves_auc(capsys, desk):
    with_dns = _mean(desk, True, "multiclass", "test_auc")
    without = _mean(desk, False, "multiclass", "test_auc")
    ok = with_dns - without >= 0.005
    report(capsys, "5b dns features", ok,
           f"mean test AUC with DNS {with_dns:.4f} vs without {without:.4f}, margin {with_dns - without:.4f} (>=0.005)")


def test_criterion_5c_multiclass_recall_non_inferior(capsys, desk):
    multi = _mean(desk, True, "multiclass", "recall_1pct")
    binary = _mean(desk, True, "binary", "recall_1pct")
    per_seed = [(round(desk["runs"][s, True, "multiclass"]["recall_1pct"], 4),
                 round(desk["runs"][s, True, "binary"]["recall_1pct"], 4)) for s in SEEDS]
    ok = multi >= binary - 0.005
    report(capsys, "5c multiclass vs binary", ok,
           f"mean recall@1%FPR multiclass {multi:.4f} vs binary {binary:.4f}, difference {multi - binary:+.4f} "
           f"(>=-0.005); per seed (multi, binary) {per_seed}")


def test_criterion_5d_degradation(capsys, desk):
    months = [desk["runs"][s, True, "multiclass"]["months"] for s in SEEDS]
    aucs = np.array([[m.auc for m in ms] for ms in months], dtype=np.float64).mean(axis=0)
    first, last = aucs[:3].mean(), aucs[-3:].mean()
    ok = len(aucs) >= 6 and last < first
    report(capsys, "5d degradation", ok,
           f"monthly test AUC {[m.month for m in months[0]]} = {np.round(aucs, 4).tolist()}; "
           f"first-3 mean {first:.4f} > last-3 mean {last:.4f}")


def test_criterion_6_realtime_latency(capsys, desk):
    model = desk["models"][0, True, "multiclass"]
    cache = DnsCache()
    for rec in desk["test_recs"]:
        host = parse_url(rec.url, desk["featurizer"].registry).host
        cache.put(host, DnsResponse(rec.ips, rec.ttl, rec.first_seen))
    clf = UrlClassifier(model, desk["featurizer"], cache)
    urls = [rec.url for rec in desk["test_recs"][-60:]]
    rep = latency_bench(clf.classify, urls, warmup=5)
    report(capsys, "6 real-time", rep.realtime,
           f"50 sequential URLs in {rep.sequential_50_total_ms:.1f} ms (<500), median {rep.median_ms:.2f} ms/URL")


# -- 7. determinism ---------------------------------------------------------------------------------------


def test_criterion_7_determinism(capsys, tmp_path):
    ws = tmp_path / "ws"
    assert main(["synth", str(ws), "--n", "4000", "--verdict-urls", "10", "--raw-rows", "2000", "--bench-urls", "50"]) == 0
    cfg = ["--config", str(ws / "run.cfg"), "--set", "train.epochs=1"]
    assert main(["featurize", str(ws / "dataset.csv"), "-o", str(ws / "feat"), *cfg]) == 0
    for name in ("a.bin", "b.bin"):
        assert main(["train", str(ws / "feat"), "-o", str(ws / name), *cfg]) == 0
    capsys.readouterr()
    same_bytes = (ws / "a.bin").read_bytes() == (ws / "b.bin").read_bytes()

    from urlguard.nn import load_features
    probe = load_features(ws / "feat" / "test.bin")[:100]
    model = load_model(ws / "a.bin")
    save_model(tmp_path / "roundtrip.bin", model)
    reloaded = load_model(tmp_path / "roundtrip.bin")
    before, after = model.forward(probe), reloaded.forward(probe)
    same_outputs = len(probe) == 100 and all(np.array_equal(x, y) for x, y in zip(before, after))
    report(capsys, "7 determinism", same_bytes and same_outputs,
           f"two train runs bitwise identical={same_bytes}; 100-row probe identical after save/load={same_outputs}")


# -- 8. feature conformance -------------------------------------------------------------------------------


def test_criterion_8_feature_conformance(capsys, registry):
    urls = random_urls(10_000, seed=8)
    vocab = build_tld_vocab([parse_url(u, registry) for u in urls], k=32)
    lex_bad = lexical_matches_oracle(registry, urls, vocab)

    # enough distinct networks that every top-30 vocabulary is full
    codes = ["".join(p) for p in product(string.ascii_uppercase, repeat=2)][:40]
    ranges = [IpRange((10 << 24) + i * 256, (10 << 24) + i * 256 + 255, 1000 + i, codes[i], f"ISP-{i}")
              for i in range(40)]
    index = IpMetadataIndex(ranges)
    rng = random.Random(8)
    responses = [DnsResponse(tuple(f"10.0.{rng.randrange(40)}.{rng.randrange(256)}" for _ in range(rng.randint(1, 3))),
                             rng.randrange(86400)) for _ in range(2000)]
    dns_vocab = build_dns_vocab(responses, index, k=30)
    dims = {extract_dns(r, index, dns_vocab).shape[0] for r in responses[:100]}

    ip_bad = index_matches_linear_scan(random.Random(9), 2000, 10_000)
    ok = lex_bad is None and dns_vocab.dim == 95 and dims == {95} and ip_bad is None
    report(capsys, "8 feature conformance", ok,
           f"lexical mismatch on 10k URLs: {lex_bad}; DNS dim {dns_vocab.dim} (95); "
           f"IP lookup mismatch on 10k IPs: {ip_bad}")
