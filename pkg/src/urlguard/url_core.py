"""URL parsing, canonicalization and dataset ingestion.

Only ``http``/``https`` URLs with a registered-suffix hostname are accepted.
The canonical form drops query, fragment and default port, lowercases the
scheme and host, and leaves the path byte-for-byte as given.
"""
from __future__ import annotations

import csv
import enum
import ipaddress
import logging
import re
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Iterable, Iterator

from .errors import IpLiteralHost, MalformedHost, MalformedRow, NoScheme, UnknownTld

logger = logging.getLogger(__name__)

DATASET_COLUMNS = ("url", "label", "first_seen", "ips", "ttl")
DEFAULT_PORTS = {"http": "80", "https": "443"}

_SCHEME_RE = re.compile(r"^(https?)://", re.IGNORECASE)
_LABEL_RE = re.compile(r"^[a-z0-9_](?:[a-z0-9_-]{0,61}[a-z0-9_])?$")


class Label(str, enum.Enum):
    BENIGN = "benign"
    MALWARE = "malware"
    PHISHING = "phishing"

    @property
    def is_malicious(self) -> bool:
        return self is not Label.BENIGN

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ParsedUrl:
    scheme: str
    subdomains: tuple[str, ...]
    domain: str
    tld: str
    path: str
    raw: str = ""

    @property
    def host(self) -> str:
        return ".".join((*self.subdomains, self.domain, self.tld))

    @property
    def canonical(self) -> str:
        return f"{self.scheme}://{self.host}{self.path}"


@dataclass(frozen=True)
class UrlRecord:
    url: str
    label: Label
    first_seen: datetime
    ips: tuple[str, ...] = ()
    ttl: int = 0


class TldRegistry:
    """Set of recognized public suffixes, matched longest-first."""

    def __init__(self, suffixes: Iterable[str]):
        entries = set()
        for s in suffixes:
            s = s.strip().lower()
            if not s or s.startswith("#"):
                continue
            entries.add(s.lstrip("."))
        if not entries:
            raise ValueError("TLD registry is empty")
        self.suffixes = frozenset(entries)
        self.max_labels = max(s.count(".") + 1 for s in entries)

    @classmethod
    def load(cls, path) -> "TldRegistry":
        with open(path, encoding="utf-8") as fh:
            return cls(line.split("#", 1)[0] for line in fh)

    def __contains__(self, suffix):
        return suffix in self.suffixes

    def __len__(self):
        return len(self.suffixes)

    def match(self, labels: list[str]) -> int:
        """Return how many trailing labels form the longest known suffix (0 if none).

        At least one label is always left over for the registrable domain.
        """
        for n in range(min(self.max_labels, len(labels) - 1), 0, -1):
            if ".".join(labels[-n:]) in self.suffixes:
                return n
        return 0


def split_url(raw: str) -> tuple[str, str, str]:
    """Structural validation: returns (scheme, lowercased host, path)."""
    raw = raw.strip()
    m = _SCHEME_RE.match(raw)
    if not m:
        raise NoScheme(f"not an http(s) URL: {raw!r}")
    scheme = m.group(1).lower()
    rest = raw[m.end():]
    cut = len(rest)
    for sep in "/?#":
        i = rest.find(sep)
        if i != -1 and i < cut:
            cut = i
    authority, tail = rest[:cut], rest[cut:]
    for sep in "?#":
        i = tail.find(sep)
        if i != -1:
            tail = tail[:i]

    if "@" in authority:
        raise MalformedHost(f"userinfo not allowed: {raw!r}")
    if authority.startswith("["):
        raise IpLiteralHost(f"IP literal host: {raw!r}")
    host, sep, port = authority.partition(":")
    if sep:
        if port != DEFAULT_PORTS[scheme]:
            raise MalformedHost(f"non-default port {port!r}: {raw!r}")
    host = host.lower()
    if not host:
        raise MalformedHost(f"empty host: {raw!r}")
    try:
        ipaddress.ip_address(host)
    except ValueError:
        pass
    else:
        raise IpLiteralHost(f"IP literal host: {raw!r}")
    if not host.isascii():
        raise MalformedHost(f"non-ASCII host (use punycode): {raw!r}")
    for label in host.split("."):
        if not _LABEL_RE.match(label):
            raise MalformedHost(f"bad host label {label!r}: {raw!r}")
    if any(ord(c) < 0x20 or ord(c) == 0x7F for c in tail):
        raise MalformedHost(f"control character in path: {raw!r}")
    return scheme, host, tail


def parse_url(raw: str, registry: TldRegistry) -> ParsedUrl:
    if not raw:
        raise NoScheme("empty URL")
    scheme, host, path = split_url(raw)
    labels = host.split(".")
    n = registry.match(labels)
    if n == 0:
        raise UnknownTld(f"unrecognized TLD in {host!r}")
    return ParsedUrl(
        scheme=scheme,
        subdomains=tuple(labels[: -n - 1]),
        domain=labels[-n - 1],
        tld=".".join(labels[-n:]),
        path=path,
        raw=raw,
    )


def normalize_url(raw: str, registry: TldRegistry | None = None) -> str:
    """Canonical form of ``raw``. With a registry the TLD is validated too."""
    if registry is not None:
        return parse_url(raw, registry).canonical
    scheme, host, path = split_url(raw)
    return f"{scheme}://{host}{path}"


def dedup_records(records: Iterable[UrlRecord]) -> list[UrlRecord]:
    """Keep one record per URL: the earliest ``first_seen``, at the first occurrence's position."""
    best: dict[str, UrlRecord] = {}
    for rec in records:
        cur = best.get(rec.url)
        if cur is None or rec.first_seen < cur.first_seen:
            best[rec.url] = rec
    # dict preserves first-insertion order even when values are replaced
    return list(best.values())


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_ips(text: str) -> tuple[str, ...]:
    ips = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        ipaddress.IPv4Address(part)  # raises ValueError
        ips.append(part)
    return tuple(ips)


def row_to_record(row: dict, line: int, registry: TldRegistry | None = None) -> UrlRecord:
    try:
        url = row["url"]
        canonical = normalize_url(url, registry)
        if canonical != url:
            raise MalformedRow(line, f"URL not canonical: {url!r}")
        label = Label(row["label"].strip().lower())
        first_seen = parse_timestamp(row["first_seen"])
        ips = parse_ips(row.get("ips") or "")
        ttl = int(row.get("ttl") or 0)
        if ttl < 0:
            raise MalformedRow(line, f"negative ttl {ttl}")
    except MalformedRow:
        raise
    except (KeyError, ValueError, TypeError, AttributeError) as exc:
        raise MalformedRow(line, str(exc)) from exc
    return UrlRecord(url, label, first_seen, ips, ttl)


def record_to_row(rec: UrlRecord) -> dict:
    return {
        "url": rec.url,
        "label": rec.label.value,
        "first_seen": format_timestamp(rec.first_seen),
        "ips": ";".join(rec.ips),
        "ttl": str(rec.ttl),
    }


def iter_csv_rows(path) -> Iterator[tuple[int, dict]]:
    """Yield (line number, row dict) for a headed CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        for row in reader:
            yield reader.line_num, row


def load_dataset(path, *, strict: bool = False, registry: TldRegistry | None = None) -> list[UrlRecord]:
    records = []
    for line, row in iter_csv_rows(path):
        try:
            records.append(row_to_record(row, line, registry))
        except MalformedRow as exc:
            if strict:
                raise
            logger.warning("%s: skipping %s", path, exc)
    return records


def write_dataset(path, records: Iterable[UrlRecord]) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=DATASET_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow(record_to_row(rec))
            n += 1
    return n


def with_dns(rec: UrlRecord, ips, ttl: int) -> UrlRecord:
    return replace(rec, ips=tuple(ips), ttl=int(ttl))
