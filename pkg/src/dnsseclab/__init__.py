"""DNSSEC toolkit: zone signing, serving, validating resolution, and a
cache-poisoning attack lab."""

__version__ = "0.1.0"

from .names import DnsName, canonical_compare
from .message import DnsMessage, Edns, Question, decode_message, encode_message
from .records import ResourceRecord, RRset, RType, canonical_rrset_bytes, group_rrsets
from .zonefile import Zone, load_zone_file, parse_zone_file, serialize_zone

__all__ = [
    "DnsName", "canonical_compare",
    "DnsMessage", "Edns", "Question", "decode_message", "encode_message",
    "ResourceRecord", "RRset", "RType", "canonical_rrset_bytes", "group_rrsets",
    "Zone", "load_zone_file", "parse_zone_file", "serialize_zone",
    "__version__",
]
