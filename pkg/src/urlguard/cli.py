"""Command-line entry point: curate -> label -> featurize -> train -> eval / degradation / bench-latency / predict."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import synthetic
from .benchmark import (DegenerateLabels, InsufficientUrls, latency_bench, monthly_degradation, recall_at_fpr_scores,
                        roc_auc_scores, write_degradation_csv)
from .config import ConfigError, RunConfig, load_config
from .dns import DnsCache, DnsResponse, load_ip2asn, write_ip2asn
from .dns.ipindex import IpMetadataIndex
from .errors import EmptyCalibration, EmptyCorpus, MalformedRow, UrlError
from .labeling import label_corpus, load_verdicts, temporal_split, write_metrics, write_verdicts
from .nn import (ChecksumMismatch, Divergence, VersionMismatch, load_features, load_model, predict_in_chunks,
                 save_features, save_model, train)
from .nn.model import UrlNetPlus
from .pipeline import CURATION_COUNTS, Featurizer, UrlClassifier, curate_rows, read_meta, write_meta
from .url_core import TldRegistry, iter_csv_rows, load_dataset, record_to_row, write_dataset

logger = logging.getLogger("urlguard")

EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_DIVERGENCE = 4


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# -- shared helpers ----------------------------------------------------------


def _need(cfg: RunConfig, key: str) -> str:
    value = getattr(cfg, key)
    if not value:
        raise CliError(EXIT_CONFIG, f"config key {key!r} is required for this command")
    return value


def _registry(cfg) -> TldRegistry:
    return TldRegistry.load(_need(cfg, "tld_registry"))


def _index(cfg) -> IpMetadataIndex:
    return load_ip2asn(_need(cfg, "ip2asn"))


def _cache(cfg) -> DnsCache:
    if cfg.dns_cache and Path(cfg.dns_cache).exists():
        return DnsCache.load(cfg.dns_cache)
    return DnsCache()


def _test_split(cfg, batch):
    """Rows first seen at or after the cutoff; anything earlier is training data and is refused."""
    cutoff = int(cfg.cutoff_time.timestamp())
    keep = batch.first_seen >= cutoff
    if not keep.all():
        logger.warning("ignoring %d rows first seen before the cutoff %s", int((~keep).sum()), cfg.cutoff)
    return batch[keep.nonzero()[0]]


def _fmt(x):
    return "" if x is None else f"{x:.6f}"


# -- commands ----------------------------------------------------------------


def cmd_curate(args, cfg):
    registry = _registry(cfg)
    cache = _cache(cfg)
    records, counts = curate_rows(
        iter_csv_rows(args.input), registry, cache=cache, live=cfg.live_dns, resolver=cfg.build("dns"),
        collection_time=cfg.collection_datetime, reputation_months=cfg.reputation_months)
    write_dataset(args.output, records)
    if cfg.live_dns and cfg.dns_cache:
        cache.save(cfg.dns_cache)
    for key in CURATION_COUNTS:
        print(f"{key} {counts[key]}")


def cmd_label(args, cfg):
    verdicts = load_verdicts(args.verdicts)
    labeled, metrics = label_corpus(verdicts, cfg.build("labeling"))
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["url", "label", "first_seen", "ips", "ttl"], lineterminator="\n")
        w.writeheader()
        for rec in labeled:
            # DNS columns left empty so that curation resolves them
            w.writerow(dict(record_to_row(rec), ips="", ttl=""))
    write_metrics(args.metrics, metrics)
    print(f"urls {len({v.url for v in verdicts})} labeled {len(labeled)} vendors {len(metrics)}")
    for label in ("benign", "malware", "phishing"):
        print(f"{label} {sum(r.label.value == label for r in labeled)}")


def cmd_featurize(args, cfg):
    registry, index = _registry(cfg), _index(cfg)
    records = load_dataset(args.dataset, strict=True, registry=registry)
    train_recs, test_recs = temporal_split(records, cfg.cutoff_time)
    if not train_recs:
        raise CliError(EXIT_IO, f"no records first seen before the cutoff {cfg.cutoff}")
    feat = cfg.build("feat")
    model_cfg = cfg.build("model")
    featurizer = Featurizer.build(train_recs, registry, index, tld_k=feat.tld_k, dns_k=feat.dns_k,
                                  max_words=feat.max_words, char_len=model_cfg.char_len,
                                  word_len=model_cfg.word_len, entropy_base=feat.entropy_base)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    save_features(out / "train.bin", featurizer.featurize(train_recs))
    save_features(out / "test.bin", featurizer.featurize(test_recs))
    write_meta(out / "featurizer.meta", dict(featurizer.to_meta(), **{"split.cutoff": cfg.cutoff}))
    print(f"train {len(train_recs)} test {len(test_recs)} lexical_dim {featurizer.lex_dim} "
          f"dns_dim {featurizer.dns_dim} words {featurizer.words.size}")


def _featurizer_from_dir(directory, cfg):
    meta = read_meta(Path(directory) / "featurizer.meta")
    # registry and index are only needed to featurize new URLs, not here
    model_cfg = cfg.build("model")
    return meta, Featurizer.from_meta(meta, model_cfg, None, None)


def cmd_train(args, cfg):
    meta, featurizer = _featurizer_from_dir(args.features, cfg)
    data = load_features(Path(args.features) / "train.bin")
    # token lengths are fixed by the feature files
    overrides = {k: v for k, v in cfg.sections["model"].items() if k not in ("char_len", "word_len")}
    try:
        model_cfg = featurizer.model_config(**overrides)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc
    model = UrlNetPlus(model_cfg, seed=cfg.seed)
    tcfg = cfg.build("train")
    model.meta.update(meta)
    result = train(model, data, tcfg, lex_count_mask=featurizer.lex_count_mask())
    for s in result.history:
        print(f"epoch {s.epoch} loss {s.loss:.6f} seconds {s.seconds:.1f}")
    save_model(args.output, model)
    print(f"params {model.num_params()} saved {args.output}")


def cmd_eval(args, cfg):
    model = load_model(args.model)
    test = _test_split(cfg, load_features(Path(args.features) / "test.bin"))
    p_mal, _ = predict_in_chunks(model, test)
    y = test.is_malicious
    try:
        auc = roc_auc_scores(p_mal, y)
        r1 = recall_at_fpr_scores(p_mal, y, 0.01)
        r01 = recall_at_fpr_scores(p_mal, y, 0.001)
    except DegenerateLabels as exc:
        raise CliError(EXIT_IO, f"test split unusable: {exc}")
    rows = [("n", str(len(test))), ("auc", _fmt(auc)), ("recall_at_1pct", _fmt(r1)), ("recall_at_01pct", _fmt(r01))]
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([k for k, _ in rows])
            w.writerow([v for _, v in rows])
    for k, v in rows:
        print(f"{k} {v}")


def cmd_degradation(args, cfg):
    model = load_model(args.model)
    test = _test_split(cfg, load_features(Path(args.features) / "test.bin"))
    months = monthly_degradation(model, test)
    if args.output:
        write_degradation_csv(args.output, months)
    print(f"{'month':<8} {'n':>7} {'auc':>9} {'r@1%':>9} {'r@0.1%':>9}")
    for m in months:
        print(f"{m.month:<8} {m.n:>7} {_fmt(m.auc):>9} {_fmt(m.recall_at_1pct):>9} {_fmt(m.recall_at_01pct):>9}")


def _classifier(args, cfg) -> UrlClassifier:
    model = load_model(args.model)
    featurizer = Featurizer.from_meta(model.meta, model.config, _registry(cfg), _index(cfg))
    return UrlClassifier(model, featurizer, _cache(cfg), live=cfg.live_dns, resolver=cfg.build("dns"))


def _read_urls(path) -> list[str]:
    if str(path).endswith(".csv"):
        return [row["url"] for _, row in iter_csv_rows(path)]
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def cmd_bench_latency(args, cfg):
    clf = _classifier(args, cfg)
    urls = _read_urls(args.urls)[: args.limit]
    report = latency_bench(clf.classify, urls, warmup=args.warmup)
    if args.output:
        report.write_csv(args.output)
    print(report.summary())


def cmd_predict(args, cfg):
    clf = _classifier(args, cfg)
    probs = clf.classify(args.url)
    for k in ("p_malicious", "p_benign", "p_malware", "p_phishing"):
        print(f"{k} {probs[k]:.6f}")


def cmd_synth(args, cfg):
    """Write a synthetic corpus plus everything needed to run the pipeline on it."""
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    corpus = synthetic.make_corpus(synthetic.CorpusSpec(n=args.n, seed=cfg.seed))
    (out / "tld.txt").write_text("".join(s + "\n" for s in corpus.suffixes), encoding="utf-8")
    write_ip2asn(out / "ip2asn.tsv", corpus.ranges)
    write_dataset(out / "dataset.csv", corpus.records)
    cache = DnsCache()
    for rec in corpus.records:
        host = rec.url.split("://", 1)[1].split("/", 1)[0]
        if host not in cache:
            cache.put(host, DnsResponse(rec.ips, rec.ttl, rec.first_seen))
    cache.save(out / "dns_cache.csv")
    with open(out / "urls.txt", "w", encoding="utf-8") as fh:
        for rec in corpus.records[-args.bench_urls:]:
            fh.write(rec.url + "\n")
    write_verdicts(out / "verdicts.csv", synthetic.make_verdicts(corpus.records[: args.verdict_urls], seed=cfg.seed))
    raw = synthetic.make_raw_curation_rows(args.raw_rows, seed=cfg.seed)
    with open(out / "raw.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["url", "label", "first_seen", "ips", "ttl"], lineterminator="\n")
        w.writeheader()
        w.writerows(raw.rows)
    (out / "run.cfg").write_text(
        f"tld_registry = {out.resolve() / 'tld.txt'}\n"
        f"ip2asn = {out.resolve() / 'ip2asn.tsv'}\n"
        f"dns_cache = {out.resolve() / 'dns_cache.csv'}\n"
        f"seed = {cfg.seed}\n",
        encoding="utf-8",
    )
    print(f"records {len(corpus.records)} verdict_rows_for {min(args.verdict_urls, len(corpus.records))} urls "
          f"raw_rows {len(raw.rows)} written to {out}")


# -- argument parsing ----------------------------------------------------------


def _global_flags(parser, suppress: bool):
    d = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", metavar="PATH", help="key = value config file", **d)
    parser.add_argument("--seed", type=int, **d)
    parser.add_argument("--cutoff", metavar="ISO8601", help="train/test split time", **d)
    parser.add_argument("--dns-cache", metavar="PATH", **d)
    parser.add_argument("--live-dns", action="store_true", help="resolve cache misses over the network", **d)
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key", **d)
    parser.add_argument("-v", "--verbose", action="store_true", **d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="urlguard", description=__doc__)
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curate", parents=[common], help="validate, normalize, resolve and deduplicate a raw CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("label", parents=[common], help="label URLs from vendor verdicts")
    p.add_argument("verdicts")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--metrics", required=True, help="vendor metrics CSV")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("featurize", parents=[common], help="split by time, fit vocabularies, write feature files")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", parents=[common], help="train a model on a featurized directory")
    p.add_argument("features")
    p.add_argument("-o", "--output", required=True, help="model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="AUC and recall at 1%% / 0.1%% FPR on the test split")
    p.add_argument("model")
    p.add_argument("features")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("degradation", parents=[common], help="per-month metrics on the test split")
    p.add_argument("model")
    p.add_argument("features")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_degradation)

    p = sub.add_parser("bench-latency", parents=[common], help="sequential per-URL latency")
    p.add_argument("model")
    p.add_argument("urls", help="text file with one URL per line, or a dataset .csv")
    p.add_argument("--limit", type=int, default=200)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bench_latency)

    p = sub.add_parser("predict", parents=[common], help="class probabilities for one URL")
    p.add_argument("model")
    p.add_argument("url")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus and a config for it")
    p.add_argument("output")
    p.add_argument("--n", type=int, default=50_000)
    p.add_argument("--verdict-urls", type=int, default=2000)
    p.add_argument("--raw-rows", type=int, default=10_000)
    p.add_argument("--bench-urls", type=int, default=200)
    p.set_defaults(func=cmd_synth)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            load_config(args.config, cfg)
        except OSError as exc:
            raise CliError(EXIT_CONFIG, f"cannot read config: {exc}")
    if args.seed is not None:
        cfg.set("seed", str(args.seed))
    if args.cutoff is not None:
        cfg.set("cutoff", args.cutoff)
    if args.dns_cache is not None:
        cfg.set("dns_cache", args.dns_cache)
    if args.live_dns:
        cfg.live_dns = True
    for item in args.set or []:
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        cfg.set(key, value)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        args.func(args, cfg)
    except CliError as exc:
        print(f"urlguard: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"urlguard: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Divergence as exc:
        print(f"urlguard: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (OSError, MalformedRow, UrlError, ChecksumMismatch, VersionMismatch, EmptyCalibration, EmptyCorpus,
            InsufficientUrls, UnicodeDecodeError) as exc:
        print(f"urlguard: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
