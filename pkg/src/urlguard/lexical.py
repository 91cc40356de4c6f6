"""Hand-crafted lexical features computed from a parsed URL."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import EmptyCorpus
from .url_core import ParsedUrl

PATH_CHARS = ("@", "%", "*", "&", "(", ")")

# Column order of the non-TLD block. The TLD one-hot block (K+1 wide) sits
# between "subdomains" and the path counts.
HEAD_FEATURES = ("https", "domain_hyphens", "domain_digits", "domain_chars", "domain_entropy", "subdomains")
TAIL_FEATURES = tuple(f"path_{c}" for c in PATH_CHARS) + ("path_subdirs", "url_spaces", "url_entropy")

# Which non-one-hot columns are unbounded counts (z-scored inside the model).
COUNT_FEATURES = frozenset(
    ["domain_hyphens", "domain_digits", "domain_chars", "subdomains", "path_subdirs", "url_spaces"]
    + [f"path_{c}" for c in PATH_CHARS]
)


def entropy(s: str, base: float | None = None) -> float:
    """Shannon entropy of the character distribution of ``s``.

    With ``base=None`` the log base is the number of distinct characters,
    which normalizes the result to [0, 1].
    """
    if not s:
        return 0.0
    counts = Counter(s)
    n = len(counts)
    if base is None:
        if n <= 1:
            return 0.0
        base = n
    total = len(s)
    h = 0.0
    for c in counts.values():
        p = c / total
        h -= p * math.log(p)
    return max(0.0, h / math.log(base))


@dataclass(frozen=True)
class TldVocab:
    tlds: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.tlds)) != len(self.tlds):
            raise ValueError("duplicate TLD in vocab")

    @property
    def size(self) -> int:
        """Width of the one-hot block, including the trailing "other" slot."""
        return len(self.tlds) + 1

    def index(self, tld: str) -> int:
        try:
            return self.tlds.index(tld)
        except ValueError:
            return len(self.tlds)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.writelines(t + "\n" for t in self.tlds)

    @classmethod
    def load(cls, path) -> "TldVocab":
        with open(path, encoding="utf-8") as fh:
            return cls(tuple(line.strip() for line in fh if line.strip()))


def top_k(counter: Counter, k: int) -> list:
    """Most frequent keys, ties broken by ascending key."""
    return [key for key, _ in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]


def build_tld_vocab(parsed: Iterable[ParsedUrl], k: int = 32) -> TldVocab:
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(u.tld for u in parsed)
    if not counts:
        raise EmptyCorpus("no URLs to build a TLD vocabulary from")
    return TldVocab(tuple(top_k(counts, k)))


def lexical_dim(vocab: TldVocab) -> int:
    return len(HEAD_FEATURES) + vocab.size + len(TAIL_FEATURES)


def feature_names(vocab: TldVocab) -> list[str]:
    tld_cols = [f"tld={t}" for t in vocab.tlds] + ["tld=<other>"]
    return list(HEAD_FEATURES) + tld_cols + list(TAIL_FEATURES)


def count_mask(vocab: TldVocab) -> np.ndarray:
    return np.array([name in COUNT_FEATURES for name in feature_names(vocab)])


def subdirectory_count(path: str) -> int:
    return sum(1 for seg in path.split("/") if seg)


def extract_lexical(u: ParsedUrl, vocab: TldVocab, entropy_base: float | None = None) -> np.ndarray:
    url = u.canonical
    dom = u.domain
    out = np.zeros(lexical_dim(vocab), dtype=np.float32)
    out[0] = 1.0 if u.scheme == "https" else 0.0
    out[1] = dom.count("-")
    out[2] = sum(c.isdigit() for c in dom)
    out[3] = len(dom)
    out[4] = entropy(dom, entropy_base)
    out[5] = len(u.subdomains)
    base = len(HEAD_FEATURES)
    out[base + vocab.index(u.tld)] = 1.0
    base += vocab.size
    for i, c in enumerate(PATH_CHARS):
        out[base + i] = u.path.count(c)
    base += len(PATH_CHARS)
    out[base] = subdirectory_count(u.path)
    out[base + 1] = url.count(" ")
    out[base + 2] = entropy(url, entropy_base)
    return out
