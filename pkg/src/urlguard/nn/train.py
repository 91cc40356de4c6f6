"""Mini-batch training loop, optimizers and input standardization."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureBatch
from .model import UrlNetPlus, loss_from_logits

logger = logging.getLogger(__name__)


class Divergence(RuntimeError):
    def __init__(self, epoch, step, value):
        super().__init__(f"loss became {value} at epoch {epoch}, step {step}")
        self.epoch, self.step, self.value = epoch, step, value


@dataclass
class TrainConfig:
    optimizer: str = "adam"  # adam | momentum
    lr: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 5
    seed: int = 0
    loss_mode: str = "multiclass"  # binary | multiclass
    phish_weight: float = 1.0

    def __post_init__(self):
        if self.optimizer not in ("adam", "momentum"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss_mode not in ("binary", "multiclass"):
            raise ValueError(f"unknown loss_mode {self.loss_mode!r}")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    seconds: float
    val_auc: float | None = None


@dataclass
class TrainResult:
    model: UrlNetPlus
    history: list = field(default_factory=list)


class Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1 - c.beta1 ** self.t
        bc2 = 1 - c.beta2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            params[k] -= (c.lr / bc1) * m / (np.sqrt(v / bc2) + c.adam_eps)


class Momentum:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.vel = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        for k, g in grads.items():
            vel = self.vel[k]
            vel *= self.cfg.momentum
            vel -= self.cfg.lr * g
            params[k] += vel


def fit_standardization(model: UrlNetPlus, batch: FeatureBatch, lex_count_mask=None):
    """Z-score statistics for the unbounded columns, taken from the training split.

    Lexical: columns flagged in ``lex_count_mask``. DNS: the IP count and
    log1p(TTL), the last two columns. Every other column passes through.
    """
    c = model.config
    if c.lex_dim:
        mean = np.zeros(c.lex_dim)
        scale = np.ones(c.lex_dim)
        if lex_count_mask is not None and len(batch):
            cols = batch.lexical[:, lex_count_mask].astype(np.float64)
            mean[lex_count_mask] = cols.mean(axis=0)
            sd = cols.std(axis=0)
            scale[lex_count_mask] = np.where(sd > 1e-6, sd, 1.0)
        model.buffers["lex_mean"] = mean.astype(model.dtype)
        model.buffers["lex_scale"] = scale.astype(model.dtype)
    if c.dns_dim:
        mean = np.zeros(c.dns_dim)
        scale = np.ones(c.dns_dim)
        if len(batch):
            cols = batch.dns[:, -2:].astype(np.float64)
            cols[:, 1] = np.log1p(np.maximum(cols[:, 1], 0))
            mean[-2:] = cols.mean(axis=0)
            sd = cols.std(axis=0)
            scale[-2:] = np.where(sd > 1e-6, sd, 1.0)
        model.buffers["dns_mean"] = mean.astype(model.dtype)
        model.buffers["dns_scale"] = scale.astype(model.dtype)


def train_step(model: UrlNetPlus, batch: FeatureBatch, cfg: TrainConfig):
    z_mal, z_phish, cache = model.logits(batch)
    value, dz_mal, dz_phish = loss_from_logits(z_mal, z_phish, batch.labels, cfg.loss_mode, cfg.phish_weight)
    return value, model.backward(cache, dz_mal, dz_phish)


def train(model: UrlNetPlus, data: FeatureBatch, cfg: TrainConfig, *, val: FeatureBatch | None = None,
          lex_count_mask=None, standardize: bool = True) -> TrainResult:
    """Train in place and return the model with per-epoch stats.

    Initialization is fixed by the model's own seed; batch order is fixed
    by ``cfg.seed``. Single-threaded numpy work is bitwise reproducible.
    """
    from ..benchmark import roc_auc_scores

    if standardize and cfg.epochs > 0:
        fit_standardization(model, data, lex_count_mask)
    opt = Adam(model.params, cfg) if cfg.optimizer == "adam" else Momentum(model.params, cfg)
    order_rng = np.random.default_rng([cfg.seed, 1])
    result = TrainResult(model)
    n = len(data)
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        perm = order_rng.permutation(n)
        total, seen = 0.0, 0
        for step, start in enumerate(range(0, n, cfg.batch_size)):
            batch = data[perm[start:start + cfg.batch_size]]
            value, grads = train_step(model, batch, cfg)
            if not math.isfinite(value):
                raise Divergence(epoch, step, value)
            opt.step(model.params, grads)
            total += value * len(batch)
            seen += len(batch)
        stats = EpochStats(epoch, total / max(seen, 1), time.perf_counter() - t0)
        if val is not None and len(val):
            p_mal, _ = predict_in_chunks(model, val)
            try:
                stats.val_auc = roc_auc_scores(p_mal, val.is_malicious)
            except ValueError:
                stats.val_auc = None
        logger.info("epoch %d loss %.5f val_auc %s (%.1fs)", epoch, stats.loss, stats.val_auc, stats.seconds)
        result.history.append(stats)
    return result


def predict_in_chunks(model: UrlNetPlus, data: FeatureBatch, chunk: int = 512):
    outs_a, outs_b = [], []
    for start in range(0, len(data), chunk):
        a, b = model.forward(data[start:start + chunk])
        outs_a.append(a)
        outs_b.append(b)
    if not outs_a:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(outs_a), np.concatenate(outs_b)
