"""DNS message model and bit-exact wire encoding/decoding."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from enum import IntEnum

from .names import DnsName, OversizeName
from .records import ResourceRecord, RType, rdata_from_wire
from .wire import Truncated, read_exact, read_name

FLAG_BITS = {
    "qr": 0x8000,
    "aa": 0x0400,
    "tc": 0x0200,
    "rd": 0x0100,
    "ra": 0x0080,
    "ad": 0x0020,
    "cd": 0x0010,
}

# Presentation order used on dig-style flag lines.
FLAG_ORDER = ("qr", "aa", "tc", "rd", "ra", "ad", "cd")


class Rcode(IntEnum):
    NOERROR = 0
    FORMERR = 1
    SERVFAIL = 2
    NXDOMAIN = 3
    REFUSED = 5


def rcode_to_text(code: int) -> str:
    try:
        return Rcode(code).name
    except ValueError:
        return f"RCODE{code}"


class TooManyRecords(ValueError):
    pass


@dataclass(frozen=True)
class Question:
    name: DnsName
    qtype: int
    qclass: int = 1


@dataclass(frozen=True)
class Edns:
    version: int = 0
    do: bool = False
    udp_payload: int = 4096


@dataclass
class DnsMessage:
    id: int = 0
    flags: frozenset = frozenset()
    rcode: int = Rcode.NOERROR
    questions: list = field(default_factory=list)
    answers: list = field(default_factory=list)
    authority: list = field(default_factory=list)
    additional: list = field(default_factory=list)
    edns: Edns | None = None

    def __post_init__(self):
        self.flags = frozenset(self.flags)
        unknown = self.flags - set(FLAG_BITS)
        if unknown:
            raise ValueError(f"unknown flags {sorted(unknown)}")

    @property
    def is_response(self) -> bool:
        return "qr" in self.flags

    @property
    def question(self) -> Question | None:
        return self.questions[0] if self.questions else None

    @property
    def do_bit(self) -> bool:
        return bool(self.edns and self.edns.do)

    def with_flags(self, *extra: str, drop: tuple[str, ...] = ()) -> "DnsMessage":
        return replace(self, flags=(self.flags | set(extra)) - set(drop))

    def section_records(self):
        """(section name, records) for the three record sections."""
        return (("answer", self.answers), ("authority", self.authority),
                ("additional", self.additional))

    def records_of(self, owner, rtype, section: str = "answer") -> list:
        records = dict(self.section_records())[section]
        return [r for r in records if r.owner == owner and r.rtype == rtype]


def make_query(name: DnsName, qtype: int, *, id: int = 0, rd: bool = False,
               edns: Edns | None = None) -> DnsMessage:
    flags = {"rd"} if rd else set()
    return DnsMessage(id=id, flags=frozenset(flags),
                      questions=[Question(name, qtype)], edns=edns)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def _write_name(out: bytearray, name: DnsName, table: dict | None) -> None:
    labels = name.labels
    if sum(len(l) + 1 for l in labels) + 1 > 255:
        raise OversizeName("name exceeds 255 octets")
    for i, label in enumerate(labels):
        suffix = labels[i:]
        if table is not None:
            offset = table.get(suffix)
            if offset is not None:
                out += struct.pack(">H", 0xC000 | offset)
                return
            if len(out) <= 0x3FFF:
                table[suffix] = len(out)
        out.append(len(label))
        out += label
    out.append(0)


def _write_record(out: bytearray, record: ResourceRecord, table: dict) -> None:
    # Owner names compress; names inside RDATA never do (signatures cover
    # the uncompressed form).
    _write_name(out, record.owner, table)
    rdata = record.rdata.to_wire()
    out += struct.pack(">HHIH", record.rtype, record.rclass, record.ttl & 0xFFFFFFFF,
                       len(rdata))
    out += rdata


def encode_message(msg: DnsMessage) -> bytes:
    additional_count = len(msg.additional) + (1 if msg.edns else 0)
    for count in (len(msg.questions), len(msg.answers), len(msg.authority),
                  additional_count):
        if count > 0xFFFF:
            raise TooManyRecords(f"section of {count} records")
    flags_word = sum(FLAG_BITS[f] for f in msg.flags) | (msg.rcode & 0x0F)
    out = bytearray(struct.pack(">HHHHHH", msg.id & 0xFFFF, flags_word,
                                len(msg.questions), len(msg.answers),
                                len(msg.authority), additional_count))
    table: dict = {}
    for q in msg.questions:
        _write_name(out, q.name, table)
        out += struct.pack(">HH", q.qtype, q.qclass)
    for _, section in msg.section_records():
        for record in section:
            _write_record(out, record, table)
    if msg.edns:
        ttl = ((msg.edns.version & 0xFF) << 16) | (0x8000 if msg.edns.do else 0)
        out += b"\x00" + struct.pack(">HHIH", RType.OPT, msg.edns.udp_payload, ttl, 0)
    return bytes(out)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def _read_record(data: bytes, offset: int) -> tuple[ResourceRecord, int]:
    owner, offset = read_name(data, offset)
    rtype, rclass, ttl, rdlength = struct.unpack(
        ">HHIH", read_exact(data, offset, 10, "record header"))
    offset += 10
    rdata_bytes = read_exact(data, offset, rdlength, "rdata")
    rdata = rdata_from_wire(rtype, rdata_bytes, data, offset)
    return ResourceRecord(owner, rtype, rclass, ttl, rdata), offset + rdlength


def decode_message(data: bytes) -> DnsMessage:
    if len(data) < 12:
        raise Truncated("message shorter than the 12-octet header")
    msg_id, flags_word, qdcount, ancount, nscount, arcount = struct.unpack(
        ">HHHHHH", data[:12])
    flags = frozenset(f for f, bit in FLAG_BITS.items() if flags_word & bit)
    msg = DnsMessage(id=msg_id, flags=flags, rcode=flags_word & 0x0F)
    offset = 12
    for _ in range(qdcount):
        name, offset = read_name(data, offset)
        qtype, qclass = struct.unpack(">HH", read_exact(data, offset, 4, "question"))
        offset += 4
        msg.questions.append(Question(name, qtype, qclass))
    for count, section in ((ancount, msg.answers), (nscount, msg.authority),
                           (arcount, msg.additional)):
        for _ in range(count):
            record, offset = _read_record(data, offset)
            if record.rtype == RType.OPT and section is msg.additional:
                if msg.edns is None:
                    msg.edns = Edns(version=(record.ttl >> 16) & 0xFF,
                                    do=bool(record.ttl & 0x8000),
                                    udp_payload=record.rclass)
                continue
            section.append(record)
    return msg
