"""Flat ``key = value`` run configuration.

Precedence, lowest first: built-in defaults, the config file, command-line
flags. Section keys are ``labeling.*``, ``model.*``, ``train.*``, ``dns.*``
and ``feat.*``; everything else is top level. Unknown keys are an error.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from datetime import datetime

from .dns import ResolverConfig
from .labeling import DEFAULT_CUTOFF, LabelingConfig
from .nn.model import ModelConfig
from .nn.train import TrainConfig
from .url_core import format_timestamp, parse_timestamp


class ConfigError(ValueError):
    pass


@dataclass
class FeatureSettings:
    tld_k: int = 32
    dns_k: int = 30
    max_words: int = 10_000
    entropy_base: float | None = None  # None: number of distinct characters


# filled in from the fitted vocabularies, never from the config
DERIVED_MODEL_KEYS = {"char_vocab_size", "word_vocab_size", "lex_dim", "dns_dim", "dtype"}

SECTIONS = {
    "labeling": LabelingConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "dns": ResolverConfig,
    "feat": FeatureSettings,
}


@dataclass
class RunConfig:
    seed: int = 0
    cutoff: str = format_timestamp(DEFAULT_CUTOFF)
    collection_time: str = ""  # empty: skip the reputation-window step
    reputation_months: int = 2
    tld_registry: str = ""
    ip2asn: str = ""
    dns_cache: str = ""
    live_dns: bool = False
    sections: dict = field(default_factory=lambda: {name: {} for name in SECTIONS})

    @property
    def cutoff_time(self) -> datetime:
        return parse_timestamp(self.cutoff)

    @property
    def collection_datetime(self) -> datetime | None:
        return parse_timestamp(self.collection_time) if self.collection_time else None

    def set(self, key: str, value: str):
        key = key.strip()
        section, dot, name = key.partition(".")
        if dot:
            cls = SECTIONS.get(section)
            if cls is None:
                raise ConfigError(f"unknown config section in {key!r}")
            fdefs = {f.name: f for f in dataclasses.fields(cls)}
            if name not in fdefs or (section == "model" and name in DERIVED_MODEL_KEYS):
                raise ConfigError(f"unknown config key {key!r}")
            self.sections[section][name] = _coerce(key, _default(fdefs[name]), value)
            return
        fdefs = {f.name: f for f in dataclasses.fields(self) if f.name != "sections"}
        if key not in fdefs:
            raise ConfigError(f"unknown config key {key!r}")
        parsed = _coerce(key, _default(fdefs[key]), value)
        if key in ("cutoff", "collection_time") and parsed:
            try:
                parse_timestamp(parsed)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        setattr(self, key, parsed)

    def build(self, section: str, **extra):
        """Instantiate a section's dataclass with defaults, file values and ``extra``."""
        kw = dict(self.sections[section])
        if section == "train":
            kw.setdefault("seed", self.seed)
        kw.update(extra)
        try:
            return SECTIONS[section](**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}: {exc}") from exc

    def items(self):
        """Effective top-level and explicitly set section values, for logging."""
        for f in dataclasses.fields(self):
            if f.name != "sections":
                yield f.name, getattr(self, f.name)
        for section, values in self.sections.items():
            for k, v in sorted(values.items()):
                yield f"{section}.{k}", v


def _default(f):
    if f.default is not dataclasses.MISSING:
        return f.default
    return f.default_factory()


def _coerce(key, default, text: str):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or default is None:
            # the only None default is an optional float
            return float(text) if text else None
        if isinstance(default, tuple):
            return tuple(int(x) for x in text.split(",") if x.strip())
        return text
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def parse_config_text(text: str, cfg: RunConfig | None = None, source: str = "<config>") -> RunConfig:
    cfg = cfg or RunConfig()
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"{source}:{n}: expected key = value")
        try:
            cfg.set(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{n}: {exc}") from exc
    return cfg


def load_config(path, cfg: RunConfig | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), cfg, str(path))
