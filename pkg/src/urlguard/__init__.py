"""Malicious URL classification from characters, words, lexical statistics and DNS answers."""
from .url_core import Label, ParsedUrl, TldRegistry, UrlRecord, normalize_url, parse_url

__version__ = "0.1.0"

__all__ = ["Label", "ParsedUrl", "TldRegistry", "UrlRecord", "normalize_url", "parse_url"]
