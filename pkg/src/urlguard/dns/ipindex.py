"""IPv4 range -> (ASN, country, ISP) lookup backed by the ip2asn TSV dump."""
from __future__ import annotations

import bisect
import ipaddress
import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from ..errors import MalformedRow

logger = logging.getLogger(__name__)


class IpInfo(NamedTuple):
    asn: int
    country: str
    isp: str


@dataclass(frozen=True)
class IpRange:
    start: int
    end: int
    asn: int
    country: str
    isp: str

    @property
    def mapped(self) -> bool:
        return self.asn != 0


def ip_to_int(ip: str) -> int:
    return int(ipaddress.IPv4Address(ip))


def int_to_ip(n: int) -> str:
    return str(ipaddress.IPv4Address(n))


class IpMetadataIndex:
    """Sorted, non-overlapping ranges with end-inclusive bisect lookup.

    Overlapping input ranges are clipped so the range with the lower start
    (earlier in file order on equal starts) keeps the contested addresses.
    Rows with ASN 0 ("Not routed") are kept but look up as unmapped.
    """

    def __init__(self, ranges: Iterable[IpRange] = ()):
        merged: list[IpRange] = []
        for r in sorted(ranges, key=lambda r: r.start):
            if r.start > r.end:
                raise ValueError(f"range start after end: {r}")
            if merged and r.start <= merged[-1].end:
                if r.end <= merged[-1].end:
                    logger.debug("dropping range fully covered by previous: %s", r)
                    continue
                r = IpRange(merged[-1].end + 1, r.end, r.asn, r.country, r.isp)
            merged.append(r)
        self.ranges = merged
        self._starts = [r.start for r in merged]

    def __len__(self):
        return len(self.ranges)

    def find(self, ip) -> IpRange | None:
        n = ip if isinstance(ip, int) else ip_to_int(ip)
        i = bisect.bisect_right(self._starts, n) - 1
        if i < 0:
            return None
        r = self.ranges[i]
        return r if n <= r.end else None

    def lookup(self, ip) -> IpInfo | None:
        """Metadata for ``ip``, or None when it is outside every range or not routed."""
        r = self.find(ip)
        if r is None or not r.mapped:
            return None
        return IpInfo(r.asn, r.country, r.isp)


def parse_ip2asn_line(line: str, lineno: int) -> IpRange:
    parts = line.rstrip("\r\n").split("\t")
    if len(parts) != 5:
        raise MalformedRow(lineno, f"expected 5 tab-separated fields, got {len(parts)}")
    try:
        return IpRange(ip_to_int(parts[0]), ip_to_int(parts[1]), int(parts[2]), parts[3], parts[4])
    except ValueError as exc:
        raise MalformedRow(lineno, str(exc)) from exc


def load_ip2asn(path) -> IpMetadataIndex:
    ranges = []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            ranges.append(parse_ip2asn_line(line, lineno))
    return IpMetadataIndex(ranges)


def write_ip2asn(path, ranges: Iterable[IpRange]):
    with open(path, "w", encoding="utf-8") as fh:
        for r in ranges:
            fh.write(f"{int_to_ip(r.start)}\t{int_to_ip(r.end)}\t{r.asn}\t{r.country}\t{r.isp}\n")
