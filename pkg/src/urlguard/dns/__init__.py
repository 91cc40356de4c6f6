from .features import DnsVocab, build_dns_vocab, extract_dns
from .ipindex import IpInfo, IpMetadataIndex, IpRange, load_ip2asn, write_ip2asn
from .resolver import DnsCache, DnsIoError, DnsResponse, ResolverConfig, resolve, resolve_many

__all__ = [
    "DnsCache",
    "DnsIoError",
    "DnsResponse",
    "DnsVocab",
    "IpInfo",
    "IpMetadataIndex",
    "IpRange",
    "ResolverConfig",
    "build_dns_vocab",
    "extract_dns",
    "load_ip2asn",
    "resolve",
    "resolve_many",
    "write_ip2asn",
]
