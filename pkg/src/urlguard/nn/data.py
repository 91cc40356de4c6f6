"""Featurized batches and their on-disk binary format."""
from __future__ import annotations

import struct
from dataclasses import dataclass, fields

import numpy as np

from ..url_core import Label

LABEL_CODES = {Label.BENIGN: 0, Label.MALWARE: 1, Label.PHISHING: 2}
CODE_LABELS = {v: k for k, v in LABEL_CODES.items()}

FEATURES_MAGIC = b"URLF"
FEATURES_VERSION = 1


@dataclass
class FeatureBatch:
    char_ids: np.ndarray  # (N, L) int32
    word_ids: np.ndarray  # (N, M) int32
    word_spans: np.ndarray  # (N, M, 2) int32
    lexical: np.ndarray  # (N, lex_dim) float32, raw (unstandardized)
    dns: np.ndarray  # (N, dns_dim) float32, raw
    labels: np.ndarray  # (N,) int8 codes, see LABEL_CODES
    first_seen: np.ndarray  # (N,) int64 unix seconds

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, idx) -> "FeatureBatch":
        return FeatureBatch(*(getattr(self, f.name)[idx] for f in fields(self)))

    @property
    def is_malicious(self) -> np.ndarray:
        return self.labels > 0

    @property
    def is_phishing(self) -> np.ndarray:
        return self.labels == 2

    @classmethod
    def concat(cls, batches) -> "FeatureBatch":
        return cls(*(np.concatenate([getattr(b, f.name) for b in batches]) for f in fields(cls)))


def _record_dtype(L, M, dl, dd):
    return np.dtype([
        ("char_ids", "<u1", (L,)),
        ("word_ids", "<u4", (M,)),
        ("word_spans", "<u2", (M, 2)),
        ("lexical", "<f4", (dl,)),
        ("dns", "<f4", (dd,)),
        ("label", "<u1"),
        ("first_seen", "<i8"),
    ])


def save_features(path, batch: FeatureBatch):
    """Header: magic, u16 version, u32 L, M, lex_dim, dns_dim, count; then packed records."""
    n, L = batch.char_ids.shape
    M = batch.word_ids.shape[1]
    dl, dd = batch.lexical.shape[1], batch.dns.shape[1]
    if L > 0xFFFF:
        raise ValueError("char length too large for u16 spans")
    rec = np.zeros(n, dtype=_record_dtype(L, M, dl, dd))
    rec["char_ids"] = batch.char_ids
    rec["word_ids"] = batch.word_ids
    rec["word_spans"] = batch.word_spans
    rec["lexical"] = batch.lexical
    rec["dns"] = batch.dns
    rec["label"] = batch.labels
    rec["first_seen"] = batch.first_seen
    with open(path, "wb") as fh:
        fh.write(FEATURES_MAGIC + struct.pack("<HIIIII", FEATURES_VERSION, L, M, dl, dd, n))
        fh.write(rec.tobytes())


def load_features(path) -> FeatureBatch:
    with open(path, "rb") as fh:
        head = fh.read(4 + 22)
        if len(head) < 26 or head[:4] != FEATURES_MAGIC:
            raise ValueError(f"{path}: not a featurized batch file")
        version, L, M, dl, dd, n = struct.unpack("<HIIIII", head[4:])
        if version != FEATURES_VERSION:
            raise ValueError(f"{path}: unsupported features version {version}")
        dt = _record_dtype(L, M, dl, dd)
        rec = np.frombuffer(fh.read(), dtype=dt)
    if len(rec) != n:
        raise ValueError(f"{path}: expected {n} records, found {len(rec)}")
    return FeatureBatch(
        rec["char_ids"].astype(np.int32),
        rec["word_ids"].astype(np.int32),
        rec["word_spans"].astype(np.int32),
        rec["lexical"].astype(np.float32),
        rec["dns"].astype(np.float32),
        rec["label"].astype(np.int8),
        rec["first_seen"].astype(np.int64),
    )
