"""Character/word URL classifier with lexical and DNS global-feature branches.

Layout::

    chars -> embed -> conv(k) + maxpool, k in kernel_sizes ------------\\
    words -> [word embed ; mean of the word's char embeds] -> attention -+-> dense+relu -> head_mal   (benign vs malicious)
    lexical -> standardize -> fc+relu -> fc+relu ------------------------|                -> head_phish (malware vs phishing)
    dns -> log1p(ttl), standardize -> fc+relu -> fc+relu ----------------/
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..url_core import Label
from . import ops
from .data import LABEL_CODES, FeatureBatch


class ShapeMismatch(ValueError):
    pass


class EmptyBatch(ValueError):
    pass


@dataclass
class ModelConfig:
    char_vocab_size: int = 97
    word_vocab_size: int = 10_002
    char_len: int = 200
    word_len: int = 32
    char_dim: int = 32
    word_dim: int = 32
    kernel_sizes: tuple = (3, 4, 5, 6)
    filters: int = 64
    word_branch: str = "attention"  # attention | conv
    lex_dim: int = 0
    dns_dim: int = 0
    use_lexical: bool = True
    use_dns: bool = True
    lex_hidden: tuple = (64, 32)
    dns_hidden: tuple = (64, 32)
    fusion_dim: int = 128
    dtype: str = "float32"

    def __post_init__(self):
        self.kernel_sizes = tuple(int(k) for k in self.kernel_sizes)
        self.lex_hidden = tuple(int(k) for k in self.lex_hidden)
        self.dns_hidden = tuple(int(k) for k in self.dns_hidden)
        if self.word_branch not in ("attention", "conv"):
            raise ValueError(f"unknown word_branch {self.word_branch!r}")
        if self.word_branch == "conv" and max(self.kernel_sizes) > self.word_len:
            raise ValueError("word_len shorter than the widest kernel")

    @property
    def word_model_dim(self) -> int:
        return self.word_dim + self.char_dim

    @property
    def lexical_on(self) -> bool:
        return self.use_lexical and self.lex_dim > 0

    @property
    def dns_on(self) -> bool:
        return self.use_dns and self.dns_dim > 0

    def to_text(self) -> dict[str, str]:
        out = {}
        for k, v in asdict(self).items():
            out[k] = ",".join(str(x) for x in v) if isinstance(v, (tuple, list)) else str(v)
        return out

    @classmethod
    def from_text(cls, d: dict[str, str]) -> "ModelConfig":
        kw = {}
        for f in fields(cls):
            if f.name not in d:
                continue
            raw = d[f.name]
            default = f.default
            if isinstance(default, bool):
                kw[f.name] = raw == "True"
            elif isinstance(default, int):
                kw[f.name] = int(raw)
            elif isinstance(default, tuple):
                kw[f.name] = tuple(int(x) for x in raw.split(",") if x)
            else:
                kw[f.name] = raw
        return cls(**kw)


class UrlNetPlus:
    """Parameters live in ``params`` (trainable) and ``buffers`` (standardization stats)."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.dtype = np.dtype(config.dtype)
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.meta: dict[str, str] = {}
        self._init(np.random.default_rng([seed, 0]))

    # -- construction -------------------------------------------------------

    def _shapes(self):
        c = self.config
        D = c.word_model_dim
        yield "char_emb", (c.char_vocab_size, c.char_dim)
        yield "word_emb", (c.word_vocab_size, c.word_dim)
        for k in c.kernel_sizes:
            yield f"char_conv{k}.w", (k * c.char_dim, c.filters)
            yield f"char_conv{k}.b", (c.filters,)
        if c.word_branch == "attention":
            for name in ("wq", "wk", "wv", "wo"):
                yield f"attn.{name}", (D, D)
            yield "attn.bo", (D,)
        else:
            for k in c.kernel_sizes:
                yield f"word_conv{k}.w", (k * D, c.filters)
                yield f"word_conv{k}.b", (c.filters,)
        if c.lexical_on:
            yield from _mlp_shapes("lex", c.lex_dim, c.lex_hidden)
        if c.dns_on:
            yield from _mlp_shapes("dns", c.dns_dim, c.dns_hidden)
        yield "fusion.w", (self.fusion_in, c.fusion_dim)
        yield "fusion.b", (c.fusion_dim,)
        for head in ("head_mal", "head_phish"):
            yield f"{head}.w", (c.fusion_dim, 1)
            yield f"{head}.b", (1,)

    @property
    def fusion_in(self) -> int:
        c = self.config
        n = len(c.kernel_sizes) * c.filters
        n += c.word_model_dim if c.word_branch == "attention" else len(c.kernel_sizes) * c.filters
        if c.lexical_on:
            n += c.lex_hidden[-1]
        if c.dns_on:
            n += c.dns_hidden[-1]
        return n

    def _init(self, rng):
        # uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and embeddings
        # (fan_in of an embedding row taken as its width); biases start at 0
        for name, shape in self._shapes():
            if name.endswith(".b") or name == "attn.bo":
                arr = np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(shape[0] if "emb" not in name else shape[1])
                arr = rng.uniform(-bound, bound, size=shape)
                if "emb" in name:
                    arr[0] = 0.0
            self.params[name] = arr.astype(self.dtype)
        c = self.config
        for prefix, dim in (("lex", c.lex_dim), ("dns", c.dns_dim)):
            self.buffers[f"{prefix}_mean"] = np.zeros(dim, dtype=self.dtype)
            self.buffers[f"{prefix}_scale"] = np.ones(dim, dtype=self.dtype)

    def num_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def astype(self, dtype) -> "UrlNetPlus":
        """Copy of the model with every tensor cast to ``dtype``."""
        cfg = ModelConfig(**{**asdict(self.config), "dtype": np.dtype(dtype).name})
        m = UrlNetPlus.__new__(UrlNetPlus)
        m.config, m.dtype, m.meta = cfg, np.dtype(dtype), dict(self.meta)
        m.params = {k: v.astype(dtype) for k, v in self.params.items()}
        m.buffers = {k: v.astype(dtype) for k, v in self.buffers.items()}
        return m

    # -- forward / backward --------------------------------------------------

    def _check(self, batch: FeatureBatch):
        c = self.config
        n = len(batch)
        if batch.char_ids.shape != (n, c.char_len) or batch.word_ids.shape != (n, c.word_len):
            raise ShapeMismatch(f"token arrays {batch.char_ids.shape}/{batch.word_ids.shape} "
                                f"do not match char_len={c.char_len}, word_len={c.word_len}")
        if batch.word_spans.shape != (n, c.word_len, 2):
            raise ShapeMismatch(f"word_spans has shape {batch.word_spans.shape}")
        if c.lexical_on and batch.lexical.shape != (n, c.lex_dim):
            raise ShapeMismatch(f"lexical has shape {batch.lexical.shape}, expected (n, {c.lex_dim})")
        if c.dns_on and batch.dns.shape != (n, c.dns_dim):
            raise ShapeMismatch(f"dns has shape {batch.dns.shape}, expected (n, {c.dns_dim})")
        if batch.char_ids.max(initial=0) >= c.char_vocab_size or batch.word_ids.max(initial=0) >= c.word_vocab_size:
            raise ShapeMismatch("token id outside vocabulary")

    def standardize_lexical(self, lex):
        return ((lex - self.buffers["lex_mean"]) / self.buffers["lex_scale"]).astype(self.dtype)

    def standardize_dns(self, dns):
        x = np.array(dns, dtype=self.dtype)
        x[:, -1] = np.log1p(np.maximum(x[:, -1], 0))
        return (x - self.buffers["dns_mean"]) / self.buffers["dns_scale"]

    def _active_len(self, char_ids) -> int:
        """Columns worth convolving: the longest URL plus one all-PAD window.

        PAD embeddings are zero, so every all-PAD window scores exactly 0
        before the bias; one of them gives the same max as all of them.
        """
        kmax = max(self.config.kernel_sizes)
        used = np.flatnonzero(char_ids.any(axis=0))
        last = int(used[-1]) + 1 if len(used) else 0
        return min(char_ids.shape[1], last + kmax)

    def logits(self, batch: FeatureBatch):
        """Returns (z_mal, z_phish, cache); cache feeds :meth:`backward`."""
        self._check(batch)
        c, p = self.config, self.params
        cache = {}
        parts = []

        char_ids = batch.char_ids[:, : self._active_len(batch.char_ids)]
        ec, cache["char_emb"] = ops.embedding_forward(p["char_emb"], char_ids)
        for k in c.kernel_sizes:
            h, cache[f"char_conv{k}"] = ops.conv_maxpool_forward(ec, p[f"char_conv{k}.w"], p[f"char_conv{k}.b"], k)
            parts.append(h)

        ew, cache["word_emb"] = ops.embedding_forward(p["word_emb"], batch.word_ids)
        spans = ops.span_matrix(batch.word_spans, char_ids.shape[1], self.dtype)
        enrich = spans @ ec
        cache["spans"] = spans
        xw = np.concatenate([ew, enrich], axis=-1)
        if c.word_branch == "attention":
            h, cache["attn"] = ops.attention_forward(
                xw, batch.word_ids != 0, p["attn.wq"], p["attn.wk"], p["attn.wv"], p["attn.wo"], p["attn.bo"])
            parts.append(h)
        else:
            for k in c.kernel_sizes:
                h, cache[f"word_conv{k}"] = ops.conv_maxpool_forward(xw, p[f"word_conv{k}.w"], p[f"word_conv{k}.b"], k)
                parts.append(h)

        if c.lexical_on:
            h, cache["lex"] = self._mlp_forward("lex", self.standardize_lexical(batch.lexical))
            parts.append(h)
        if c.dns_on:
            h, cache["dns"] = self._mlp_forward("dns", self.standardize_dns(batch.dns))
            parts.append(h)

        cache["widths"] = [h.shape[1] for h in parts]
        x = np.concatenate(parts, axis=1)
        pre, cache["fusion"] = ops.dense_forward(x, p["fusion.w"], p["fusion.b"])
        f, cache["fusion_relu"] = ops.relu_forward(pre)
        cache["f"] = f
        z_mal = (f @ p["head_mal.w"] + p["head_mal.b"])[:, 0]
        z_phish = (f @ p["head_phish.w"] + p["head_phish.b"])[:, 0]
        return z_mal, z_phish, cache

    def _mlp_forward(self, prefix, x):
        caches = []
        for i in range(len(getattr(self.config, f"{prefix}_hidden"))):
            x, cd = ops.dense_forward(x, self.params[f"{prefix}.fc{i + 1}.w"], self.params[f"{prefix}.fc{i + 1}.b"])
            x, cr = ops.relu_forward(x)
            caches.append((cd, cr))
        return x, caches

    def _mlp_backward(self, prefix, caches, dout, grads):
        for i in reversed(range(len(caches))):
            cd, cr = caches[i]
            dout = ops.relu_backward(cr, dout)
            w = self.params[f"{prefix}.fc{i + 1}.w"]
            dout, grads[f"{prefix}.fc{i + 1}.w"], grads[f"{prefix}.fc{i + 1}.b"] = ops.dense_backward(cd, dout, w)

    def backward(self, cache, dz_mal, dz_phish) -> dict[str, np.ndarray]:
        c, p = self.config, self.params
        g: dict[str, np.ndarray] = {}
        f = cache["f"]
        g["head_mal.w"] = f.T @ dz_mal[:, None]
        g["head_mal.b"] = np.array([dz_mal.sum()], dtype=f.dtype)
        g["head_phish.w"] = f.T @ dz_phish[:, None]
        g["head_phish.b"] = np.array([dz_phish.sum()], dtype=f.dtype)
        df = dz_mal[:, None] * p["head_mal.w"].T + dz_phish[:, None] * p["head_phish.w"].T
        dpre = ops.relu_backward(cache["fusion_relu"], df)
        dx, g["fusion.w"], g["fusion.b"] = ops.dense_backward(cache["fusion"], dpre, p["fusion.w"])

        splits = np.cumsum(cache["widths"])[:-1]
        dparts = list(np.split(dx, splits, axis=1))
        dparts.reverse()

        if c.dns_on:
            self._mlp_backward("dns", cache["dns"], dparts.pop(0), g)
        if c.lexical_on:
            self._mlp_backward("lex", cache["lex"], dparts.pop(0), g)

        if c.word_branch == "attention":
            dxw, g["attn.wq"], g["attn.wk"], g["attn.wv"], g["attn.wo"], g["attn.bo"] = ops.attention_backward(
                cache["attn"], dparts.pop(0), p["attn.wq"], p["attn.wk"], p["attn.wv"], p["attn.wo"])
        else:
            dxw = 0.0
            for k in reversed(c.kernel_sizes):
                dk, g[f"word_conv{k}.w"], g[f"word_conv{k}.b"] = ops.conv_maxpool_backward(
                    cache[f"word_conv{k}"], dparts.pop(0))
                dxw = dxw + dk
        dew = dxw[..., : c.word_dim]
        denrich = dxw[..., c.word_dim:]
        g["word_emb"] = ops.embedding_backward(cache["word_emb"], dew, p["word_emb"].shape)

        dec = cache["spans"].transpose(0, 2, 1) @ denrich
        dtable = ops.embedding_backward(cache["char_emb"], dec, p["char_emb"].shape)
        n_chars = p["char_emb"].shape[0]
        for k in reversed(c.kernel_sizes):
            dk, g[f"char_conv{k}.w"], g[f"char_conv{k}.b"] = ops.conv_maxpool_backward(
                cache[f"char_conv{k}"], dparts.pop(0), ids=cache["char_emb"], n_rows=n_chars)
            dtable += dk
        dtable[0] = 0.0  # PAD row stays at zero
        g["char_emb"] = dtable
        return g

    def forward(self, batch: FeatureBatch):
        """(p_malicious, p_phishing_given_malicious), both float64 arrays of shape (N,)."""
        z_mal, z_phish, _ = self.logits(batch)
        return ops.sigmoid(z_mal.astype(np.float64)), ops.sigmoid(z_phish.astype(np.float64))


def _mlp_shapes(prefix, dim, hidden):
    fan_in = dim
    for i, h in enumerate(hidden):
        yield f"{prefix}.fc{i + 1}.w", (fan_in, h)
        yield f"{prefix}.fc{i + 1}.b", (h,)
        fan_in = h


def _targets(labels):
    codes = np.asarray(labels)
    if codes.dtype.kind in "OU":
        codes = np.array([LABEL_CODES[Label(x)] for x in codes], dtype=np.int8)
    return (codes > 0).astype(np.float64), (codes == 2).astype(np.float64)


def loss_from_logits(z_mal, z_phish, labels, mode="multiclass", lam=1.0):
    """Total loss and its gradients w.r.t. both logit vectors."""
    n = len(z_mal)
    if n == 0:
        raise EmptyBatch("loss of an empty batch")
    if mode not in ("binary", "multiclass"):
        raise ValueError(f"unknown loss mode {mode!r}")
    y_mal, y_phish = _targets(labels)
    total = ops.bce_with_logits(z_mal, y_mal).mean()
    dz_mal = (ops.sigmoid(z_mal) - y_mal) / n
    dz_phish = np.zeros_like(z_phish)
    if mode == "multiclass":
        mal = y_mal > 0
        n_mal = int(mal.sum())
        if n_mal:
            total = total + lam * ops.bce_with_logits(z_phish[mal], y_phish[mal]).mean()
            dz_phish[mal] = lam * (ops.sigmoid(z_phish[mal]) - y_phish[mal]) / n_mal
    return float(total), dz_mal.astype(z_mal.dtype), dz_phish.astype(z_phish.dtype)


def loss(p_mal, p_phish, labels, mode="multiclass", lam=1.0, eps=1e-12):
    """Same objective as :func:`loss_from_logits`, computed from probabilities."""
    p_mal = np.clip(np.asarray(p_mal, dtype=np.float64), eps, 1 - eps)
    p_phish = np.clip(np.asarray(p_phish, dtype=np.float64), eps, 1 - eps)
    if len(p_mal) == 0:
        raise EmptyBatch("loss of an empty batch")
    y_mal, y_phish = _targets(labels)

    def bce(p, y):
        return -(y * np.log(p) + (1 - y) * np.log(1 - p))

    total = bce(p_mal, y_mal).mean()
    if mode == "multiclass":
        mal = y_mal > 0
        if mal.any():
            total += lam * bce(p_phish[mal], y_phish[mal]).mean()
    elif mode != "binary":
        raise ValueError(f"unknown loss mode {mode!r}")
    return float(total)


def class_probabilities(p_mal, p_phish_given_mal) -> dict[str, np.ndarray]:
    p_mal = np.asarray(p_mal, dtype=np.float64)
    p_pg = np.asarray(p_phish_given_mal, dtype=np.float64)
    return {
        "p_malicious": p_mal,
        "p_benign": 1.0 - p_mal,
        "p_phishing": p_mal * p_pg,
        "p_malware": p_mal * (1.0 - p_pg),
    }


def predict(model: UrlNetPlus, batch: FeatureBatch) -> dict[str, np.ndarray]:
    return class_probabilities(*model.forward(batch))
