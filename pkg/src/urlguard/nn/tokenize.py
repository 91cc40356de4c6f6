"""Character and word tokenization of canonical URLs."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..lexical import top_k

PAD = 0
UNK = 1
_WORD_RE = re.compile(r"[A-Za-z0-9]+|[^A-Za-z0-9]")


def segment_words(url: str) -> list[tuple[str, int, int]]:
    """Alphanumeric runs plus every delimiter as its own one-character word, with spans."""
    return [(m.group(), m.start(), m.end()) for m in _WORD_RE.finditer(url)]


class CharVocab:
    """Printable ASCII (0x20-0x7e) after the reserved PAD and UNK ids."""

    first, last = 0x20, 0x7E

    @property
    def size(self) -> int:
        return 2 + self.last - self.first + 1

    def encode(self, url: str, length: int) -> np.ndarray:
        out = np.zeros(length, dtype=np.int32)
        codes = np.frombuffer(url[:length].encode("utf-32-le"), dtype=np.uint32).astype(np.int32)
        ok = (codes >= self.first) & (codes <= self.last)
        out[: len(codes)] = np.where(ok, codes - self.first + 2, UNK)
        return out


class WordVocab:
    def __init__(self, words: Iterable[str]):
        self.words = tuple(words)
        self.ids = {w: i + 2 for i, w in enumerate(self.words)}
        if len(self.ids) != len(self.words):
            raise ValueError("duplicate word in vocab")

    @property
    def size(self) -> int:
        return len(self.words) + 2

    def get(self, word: str) -> int:
        return self.ids.get(word, UNK)

    @classmethod
    def build(cls, urls: Iterable[str], max_words: int = 10_000) -> "WordVocab":
        counts = Counter(w for url in urls for w, _, _ in segment_words(url))
        return cls(top_k(counts, max_words))


@dataclass
class TokenizedUrl:
    char_ids: np.ndarray  # (L,)
    word_ids: np.ndarray  # (M,)
    word_spans: np.ndarray  # (M, 2) [start, end) into char_ids; (0, 0) for padding


_CHARS = CharVocab()


def tokenize(url: str, words: WordVocab, char_len: int = 200, word_len: int = 32) -> TokenizedUrl:
    char_ids = _CHARS.encode(url, char_len)
    word_ids = np.zeros(word_len, dtype=np.int32)
    spans = np.zeros((word_len, 2), dtype=np.int32)
    for i, (w, s, e) in enumerate(segment_words(url)[:word_len]):
        word_ids[i] = words.get(w)
        if s < char_len:
            spans[i] = (s, min(e, char_len))
    return TokenizedUrl(char_ids, word_ids, spans)
