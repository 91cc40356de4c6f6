"""DNS-derived feature block: ASN / country / ISP multi-hots plus IP count and TTL."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import EmptyCorpus
from ..lexical import top_k
from .ipindex import IpMetadataIndex

DEFAULT_TOP = 30


@dataclass(frozen=True)
class DnsVocab:
    asns: tuple[int, ...]
    countries: tuple[str, ...]
    isps: tuple[str, ...]

    def __post_init__(self):
        for name in ("asns", "countries", "isps"):
            vals = getattr(self, name)
            if len(set(vals)) != len(vals):
                raise ValueError(f"duplicate entries in {name}")

    @property
    def dim(self) -> int:
        return len(self.asns) + len(self.countries) + len(self.isps) + 3 + 2

    def blocks(self) -> list[tuple[str, tuple]]:
        return [("asn", self.asns), ("country", self.countries), ("isp", self.isps)]

    def feature_names(self) -> list[str]:
        names = []
        for kind, vals in self.blocks():
            names += [f"{kind}={v}" for v in vals] + [f"{kind}=<other>"]
        return names + ["ip_count", "ttl"]

    def save(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for kind, vals in self.blocks():
            (d / f"{kind}.txt").write_text("".join(f"{v}\n" for v in vals), encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "DnsVocab":
        d = Path(directory)

        def read(kind):
            text = (d / f"{kind}.txt").read_text(encoding="utf-8")
            return [line for line in text.split("\n") if line]

        return cls(tuple(int(a) for a in read("asn")), tuple(read("country")), tuple(read("isp")))


def build_dns_vocab(records: Iterable, index: IpMetadataIndex, k: int = DEFAULT_TOP) -> DnsVocab:
    """Top-``k`` ASNs, countries and ISPs by the number of records they appear in."""
    asns, countries, isps = Counter(), Counter(), Counter()
    n = 0
    for rec in records:
        n += 1
        infos = {index.lookup(ip) for ip in rec.ips} - {None}
        asns.update({i.asn for i in infos})
        countries.update({i.country for i in infos})
        isps.update({i.isp for i in infos})
    if n == 0:
        raise EmptyCorpus("no records to build a DNS vocabulary from")
    return DnsVocab(tuple(top_k(asns, k)), tuple(top_k(countries, k)), tuple(top_k(isps, k)))


def extract_dns(resp, index: IpMetadataIndex, vocab: DnsVocab) -> np.ndarray:
    """``resp`` is anything with ``ips`` and ``ttl`` (a DnsResponse or a UrlRecord)."""
    out = np.zeros(vocab.dim, dtype=np.float32)
    na, nc = len(vocab.asns) + 1, len(vocab.countries) + 1
    offsets = (0, na, na + nc)
    lookups = (
        {v: i for i, v in enumerate(vocab.asns)},
        {v: i for i, v in enumerate(vocab.countries)},
        {v: i for i, v in enumerate(vocab.isps)},
    )
    sizes = (len(vocab.asns), len(vocab.countries), len(vocab.isps))
    for ip in resp.ips:
        info = index.lookup(ip)
        for b in range(3):
            slot = sizes[b] if info is None else lookups[b].get(info[b], sizes[b])
            out[offsets[b] + slot] = 1.0
    out[-2] = len(resp.ips)
    out[-1] = resp.ttl
    return out
