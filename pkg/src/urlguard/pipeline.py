"""Glue between curated records, feature extractors, vocabularies and the model."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence
from urllib.parse import quote, unquote

import numpy as np

from .dns import (DnsCache, DnsResponse, DnsVocab, IpMetadataIndex, ResolverConfig, build_dns_vocab, extract_dns,
                  resolve, resolve_many)
from .errors import IpLiteralHost, MalformedRow, NoScheme, UrlError
from .labeling import filter_reputation_window
from .lexical import TldVocab, build_tld_vocab, count_mask, extract_lexical, lexical_dim
from .nn.data import LABEL_CODES, FeatureBatch
from .nn.model import ModelConfig, UrlNetPlus, predict
from .nn.tokenize import CharVocab, WordVocab, tokenize
from .url_core import TldRegistry, UrlRecord, dedup_records, parse_url, row_to_record, split_url, with_dns

logger = logging.getLogger(__name__)


def _pack(items) -> str:
    return ",".join(quote(str(x), safe="") for x in items)


def _unpack(text: str) -> list[str]:
    return [unquote(x) for x in text.split(",")] if text else []


@dataclass
class Featurizer:
    registry: TldRegistry
    index: IpMetadataIndex
    tld_vocab: TldVocab
    dns_vocab: DnsVocab
    words: WordVocab
    char_len: int = 200
    word_len: int = 32
    entropy_base: float | None = None

    @classmethod
    def build(cls, train: Sequence[UrlRecord], registry: TldRegistry, index: IpMetadataIndex, *,
              tld_k: int = 32, dns_k: int = 30, max_words: int = 10_000, **kw) -> "Featurizer":
        """Fit every vocabulary on the training records only."""
        parsed = [parse_url(r.url, registry) for r in train]
        return cls(
            registry=registry,
            index=index,
            tld_vocab=build_tld_vocab(parsed, tld_k),
            dns_vocab=build_dns_vocab(train, index, dns_k),
            words=WordVocab.build((r.url for r in train), max_words),
            **kw,
        )

    @property
    def lex_dim(self) -> int:
        return lexical_dim(self.tld_vocab)

    @property
    def dns_dim(self) -> int:
        return self.dns_vocab.dim

    def lex_count_mask(self) -> np.ndarray:
        return count_mask(self.tld_vocab)

    def model_config(self, **overrides) -> ModelConfig:
        base = dict(
            char_vocab_size=CharVocab().size,
            word_vocab_size=self.words.size,
            char_len=self.char_len,
            word_len=self.word_len,
            lex_dim=self.lex_dim,
            dns_dim=self.dns_dim,
        )
        base.update(overrides)
        return ModelConfig(**base)

    def featurize(self, records: Iterable[UrlRecord]) -> FeatureBatch:
        records = list(records)
        n = len(records)
        char_ids = np.zeros((n, self.char_len), dtype=np.int32)
        word_ids = np.zeros((n, self.word_len), dtype=np.int32)
        spans = np.zeros((n, self.word_len, 2), dtype=np.int32)
        lex = np.zeros((n, self.lex_dim), dtype=np.float32)
        dns = np.zeros((n, self.dns_dim), dtype=np.float32)
        labels = np.zeros(n, dtype=np.int8)
        first_seen = np.zeros(n, dtype=np.int64)
        for i, r in enumerate(records):
            u = parse_url(r.url, self.registry)
            tok = tokenize(u.canonical, self.words, self.char_len, self.word_len)
            char_ids[i], word_ids[i], spans[i] = tok.char_ids, tok.word_ids, tok.word_spans
            lex[i] = extract_lexical(u, self.tld_vocab, self.entropy_base)
            dns[i] = extract_dns(r, self.index, self.dns_vocab)
            labels[i] = LABEL_CODES[r.label]
            first_seen[i] = int(r.first_seen.timestamp())
        return FeatureBatch(char_ids, word_ids, spans, lex, dns, labels, first_seen)

    def featurize_url(self, url: str, resp: DnsResponse) -> FeatureBatch:
        u = parse_url(url, self.registry)
        tok = tokenize(u.canonical, self.words, self.char_len, self.word_len)
        return FeatureBatch(
            tok.char_ids[None],
            tok.word_ids[None],
            tok.word_spans[None],
            extract_lexical(u, self.tld_vocab, self.entropy_base)[None],
            extract_dns(resp, self.index, self.dns_vocab)[None],
            np.zeros(1, dtype=np.int8),
            np.zeros(1, dtype=np.int64),
        )

    # -- persistence -----------------------------------------------------------

    def to_meta(self) -> dict[str, str]:
        return {
            "vocab.words": _pack(self.words.words),
            "vocab.tld": _pack(self.tld_vocab.tlds),
            "vocab.asn": _pack(self.dns_vocab.asns),
            "vocab.country": _pack(self.dns_vocab.countries),
            "vocab.isp": _pack(self.dns_vocab.isps),
            "feat.entropy_base": "" if self.entropy_base is None else repr(self.entropy_base),
            "feat.char_len": str(self.char_len),
            "feat.word_len": str(self.word_len),
        }

    @classmethod
    def from_meta(cls, meta: dict[str, str], config: ModelConfig, registry: TldRegistry | None,
                  index: IpMetadataIndex | None) -> "Featurizer":
        base = meta.get("feat.entropy_base", "")
        return cls(
            registry=registry,
            index=index,
            tld_vocab=TldVocab(tuple(_unpack(meta["vocab.tld"]))),
            dns_vocab=DnsVocab(
                tuple(int(a) for a in _unpack(meta["vocab.asn"])),
                tuple(_unpack(meta["vocab.country"])),
                tuple(_unpack(meta["vocab.isp"])),
            ),
            words=WordVocab(_unpack(meta["vocab.words"])),
            char_len=int(meta.get("feat.char_len", config.char_len)),
            word_len=int(meta.get("feat.word_len", config.word_len)),
            entropy_base=float(base) if base else None,
        )


def write_meta(path, meta: dict[str, str]):
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in sorted(meta.items()):
            fh.write(f"{k}={v}\n")


def read_meta(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                k, _, v = line.partition("=")
                out[k] = v
    return out


CURATION_COUNTS = ("read", "no_scheme", "ip_literal", "malformed", "unknown_tld", "padded", "duplicates",
                   "reputation", "kept")


def curate_rows(rows: Iterable[tuple[int, dict]], registry: TldRegistry, *, cache: DnsCache | None = None,
                live: bool = False, resolver: ResolverConfig | None = None, collection_time=None,
                reputation_months: int = 2) -> tuple[list[UrlRecord], dict[str, int]]:
    """The curation pass over raw (line, row) pairs; returns records and per-step counts.

    Steps: format validation, normalization, TLD validation, DNS fill/padding,
    deduplication, reputation window. Rows with an empty ``ttl`` column have
    no DNS data yet and are looked up in ``cache`` (and live when ``live``);
    unresolvable ones are padded with no IPs and TTL 0.
    """
    counts = dict.fromkeys(CURATION_COUNTS, 0)
    staged = []
    for line, row in rows:
        counts["read"] += 1
        raw = (row.get("url") or "").strip()
        try:
            scheme, host, path = split_url(raw)
        except NoScheme:
            counts["no_scheme"] += 1
            continue
        except IpLiteralHost:
            counts["ip_literal"] += 1
            continue
        except UrlError:
            counts["malformed"] += 1
            continue
        if registry.match(host.split(".")) == 0:
            counts["unknown_tld"] += 1
            continue
        need_dns = not (row.get("ttl") or "").strip()
        fixed = dict(row, url=f"{scheme}://{host}{path}", ttl=(row.get("ttl") or "0"))
        try:
            rec = row_to_record(fixed, line, registry)
        except MalformedRow as exc:
            logger.info("dropping %s", exc)
            counts["malformed"] += 1
            continue
        staged.append((rec, host if need_dns else None))

    cache = cache if cache is not None else DnsCache()
    missing = sorted({h for _, h in staged if h is not None and h not in cache})
    if live and missing:
        resolve_many(missing, resolver, cache)
    records = []
    for rec, host in staged:
        if host is not None:
            resp = cache.get(host) or DnsResponse.empty()
            if not resp.ips:
                counts["padded"] += 1
            rec = with_dns(rec, resp.ips, resp.ttl if resp.ips else 0)
        records.append(rec)

    unique = dedup_records(records)
    counts["duplicates"] = len(records) - len(unique)
    if collection_time is not None:
        kept = filter_reputation_window(unique, collection_time, reputation_months)
        counts["reputation"] = len(unique) - len(kept)
        unique = kept
    counts["kept"] = len(unique)
    return unique, counts


class UrlClassifier:
    """Raw URL in, class probabilities out. DNS comes from the cache unless ``live``."""

    def __init__(self, model: UrlNetPlus, featurizer: Featurizer, cache: DnsCache | None = None,
                 live: bool = False, resolver: ResolverConfig | None = None):
        self.model = model
        self.featurizer = featurizer
        self.cache = cache if cache is not None else DnsCache()
        self.live = live
        self.resolver = resolver

    def dns_for(self, host: str) -> DnsResponse:
        hit = self.cache.get(host)
        if hit is not None:
            return hit
        if not self.live:
            return DnsResponse.empty()
        resp = resolve(host, self.resolver)
        self.cache.put(host, resp)
        return resp

    def classify(self, url: str) -> dict[str, float]:
        u = parse_url(url, self.featurizer.registry)
        batch = self.featurizer.featurize_url(u.canonical, self.dns_for(u.host))
        return {k: float(v[0]) for k, v in predict(self.model, batch).items()}
