"""Minimal stub resolver for A records (UDP with TCP fallback) plus an offline cache.

Remote outcomes (NXDOMAIN, SERVFAIL, timeouts, garbage replies) all map to
the empty response; only local socket failures raise.
"""
from __future__ import annotations

import csv
import random
import socket
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable

from ..errors import UrlGuardError
from ..url_core import format_timestamp, parse_ips, parse_timestamp

TYPE_A = 1
CLASS_IN = 1
FLAG_RD = 0x0100
FLAG_TC = 0x0200
FLAG_QR = 0x8000
RCODE_NXDOMAIN = 3


class DnsIoError(UrlGuardError, OSError):
    """Local socket failure (cannot create, bind or send)."""


@dataclass(frozen=True)
class DnsResponse:
    ips: tuple[str, ...] = ()
    ttl: int = 0
    resolved_at: datetime | None = None

    @classmethod
    def empty(cls, resolved_at=None) -> "DnsResponse":
        return cls((), 0, resolved_at)


@dataclass
class ResolverConfig:
    server: str = "127.0.0.1"
    port: int = 53
    timeout: float = 2.0
    retries: int = 1
    max_in_flight: int = 64
    ttl_mode: str = "min"  # min | max | first

    def __post_init__(self):
        if self.ttl_mode not in ("min", "max", "first"):
            raise ValueError(f"unknown ttl_mode {self.ttl_mode!r}")


def encode_name(name: str) -> bytes:
    out = b""
    for part in name.rstrip(".").encode("ascii").split(b"."):
        if not 0 < len(part) < 64:
            raise ValueError(f"bad DNS label in {name!r}")
        out += bytes([len(part)]) + part
    return out + b"\x00"


def build_query(name: str, qid: int, qtype: int = TYPE_A) -> bytes:
    header = struct.pack("!HHHHHH", qid, FLAG_RD, 1, 0, 0, 0)
    return header + encode_name(name) + struct.pack("!HH", qtype, CLASS_IN)


def decode_name(data: bytes, offset: int) -> tuple[str, int]:
    """Decode a possibly compressed name; returns (name, offset after it)."""
    labels = []
    end = None
    jumps = 0
    while True:
        if offset >= len(data):
            raise ValueError("name runs past end of message")
        length = data[offset]
        if length & 0xC0 == 0xC0:
            if offset + 1 >= len(data):
                raise ValueError("truncated pointer")
            if end is None:
                end = offset + 2
            offset = ((length & 0x3F) << 8) | data[offset + 1]
            jumps += 1
            if jumps > 64:
                raise ValueError("compression loop")
            continue
        offset += 1
        if length == 0:
            break
        labels.append(data[offset:offset + length].decode("ascii", "replace"))
        offset += length
    return ".".join(labels), (end if end is not None else offset)


@dataclass
class DnsMessage:
    qid: int
    flags: int
    answers: list = field(default_factory=list)  # (name, type, ttl, rdata)

    @property
    def truncated(self) -> bool:
        return bool(self.flags & FLAG_TC)

    @property
    def rcode(self) -> int:
        return self.flags & 0x000F


def parse_message(data: bytes) -> DnsMessage:
    if len(data) < 12:
        raise ValueError("short DNS message")
    qid, flags, qd, an, _ns, _ar = struct.unpack("!HHHHHH", data[:12])
    off = 12
    for _ in range(qd):
        _, off = decode_name(data, off)
        off += 4
    msg = DnsMessage(qid, flags)
    for _ in range(an):
        name, off = decode_name(data, off)
        if off + 10 > len(data):
            raise ValueError("truncated resource record")
        rtype, _rclass, ttl, rdlen = struct.unpack("!HHIH", data[off:off + 10])
        off += 10
        rdata = data[off:off + rdlen]
        if len(rdata) != rdlen:
            raise ValueError("truncated rdata")
        off += rdlen
        msg.answers.append((name, rtype, ttl, rdata))
    return msg


def response_from_message(msg: DnsMessage, ttl_mode: str = "min", resolved_at=None) -> DnsResponse:
    if msg.rcode != 0:
        return DnsResponse.empty(resolved_at)
    ips = []
    for _name, rtype, _ttl, rdata in msg.answers:
        if rtype == TYPE_A and len(rdata) == 4:
            ip = socket.inet_ntoa(rdata)
            if ip not in ips:
                ips.append(ip)
    if not ips:
        return DnsResponse.empty(resolved_at)
    ttls = [ttl for _, _, ttl, _ in msg.answers]
    if ttl_mode == "min":
        ttl = min(ttls)
    elif ttl_mode == "max":
        ttl = max(ttls)
    else:
        ttl = ttls[0]
    return DnsResponse(tuple(ips), int(ttl), resolved_at)


def _recv_exact(sock, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("connection closed mid-message")
        buf += chunk
    return buf


def _query_udp(query: bytes, qid: int, cfg: ResolverConfig) -> DnsMessage | None:
    try:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    except OSError as exc:
        raise DnsIoError(f"cannot create UDP socket: {exc}") from exc
    with sock:
        sock.settimeout(cfg.timeout)
        for _attempt in range(1 + cfg.retries):
            try:
                sock.sendto(query, (cfg.server, cfg.port))
            except OSError as exc:
                raise DnsIoError(f"cannot send to {cfg.server}:{cfg.port}: {exc}") from exc
            try:
                while True:
                    data, _ = sock.recvfrom(4096)
                    try:
                        msg = parse_message(data)
                    except ValueError:
                        continue
                    if msg.qid == qid and msg.flags & FLAG_QR:
                        return msg
            except (socket.timeout, ConnectionRefusedError):
                continue
    return None


def _query_tcp(query: bytes, qid: int, cfg: ResolverConfig) -> DnsMessage | None:
    try:
        with socket.create_connection((cfg.server, cfg.port), timeout=cfg.timeout) as sock:
            sock.sendall(struct.pack("!H", len(query)) + query)
            (length,) = struct.unpack("!H", _recv_exact(sock, 2))
            msg = parse_message(_recv_exact(sock, length))
    except (OSError, ValueError):
        return None
    return msg if msg.qid == qid else None


def resolve(domain: str, config: ResolverConfig | None = None, rng: random.Random | None = None) -> DnsResponse:
    cfg = config or ResolverConfig()
    now = datetime.now(timezone.utc).replace(microsecond=0)
    qid = (rng or random).randrange(0x10000)
    try:
        query = build_query(domain, qid)
    except (ValueError, UnicodeEncodeError):
        return DnsResponse.empty(now)
    msg = _query_udp(query, qid, cfg)
    if msg is not None and msg.truncated:
        msg = _query_tcp(query, qid, cfg) or msg
    if msg is None:
        return DnsResponse.empty(now)
    return response_from_message(msg, cfg.ttl_mode, now)


class DnsCache:
    """domain -> DnsResponse map; concurrent reads, writes under a lock."""

    COLUMNS = ("domain", "ips", "ttl", "resolved_at")

    def __init__(self, entries: dict | None = None):
        self._entries: dict[str, DnsResponse] = dict(entries or {})
        self._lock = threading.Lock()

    def __contains__(self, domain):
        return domain in self._entries

    def __len__(self):
        return len(self._entries)

    def get(self, domain, default=None):
        return self._entries.get(domain, default)

    def put(self, domain: str, resp: DnsResponse):
        with self._lock:
            self._entries[domain] = resp

    def items(self):
        return list(self._entries.items())

    @classmethod
    def load(cls, path) -> "DnsCache":
        entries = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                at = row.get("resolved_at") or ""
                entries[row["domain"]] = DnsResponse(
                    parse_ips(row.get("ips") or ""),
                    int(row.get("ttl") or 0),
                    parse_timestamp(at) if at else None,
                )
        return cls(entries)

    def save(self, path):
        with self._lock:
            items = sorted(self._entries.items())
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for domain, r in items:
                at = format_timestamp(r.resolved_at) if r.resolved_at else ""
                w.writerow([domain, ";".join(r.ips), r.ttl, at])


def resolve_many(domains: Iterable[str], config: ResolverConfig | None = None,
                 cache: DnsCache | None = None) -> dict[str, DnsResponse]:
    """Resolve distinct domains concurrently, consulting and filling ``cache``."""
    cfg = config or ResolverConfig()
    todo = []
    out = {}
    for d in dict.fromkeys(domains):
        hit = cache.get(d) if cache is not None else None
        if hit is not None:
            out[d] = hit
        else:
            todo.append(d)

    def work(d):
        resp = resolve(d, cfg)
        if cache is not None:
            cache.put(d, resp)
        return d, resp

    if todo:
        with ThreadPoolExecutor(max_workers=max(1, cfg.max_in_flight)) as pool:
            for d, resp in pool.map(work, todo):
                out[d] = resp
    return out
