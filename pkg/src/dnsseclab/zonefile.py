"""Master zone file parsing and serialization (RFC-1035-style grammar subset).

Supports $ORIGIN/$TTL/$INCLUDE, parenthesized multi-line records, quoted
strings, and base64 continuation for DNSKEY/RRSIG payloads.
"""

from __future__ import annotations

import base64
import io
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, TextIO

from .names import DnsName, NameError_
from .records import (RClass, RType, RdataError, ResourceRecord, RRset,
                      group_rrsets, rdata_from_text, rtype_from_text,
                      rtype_to_text, timestamp_to_text)


class ZoneError(ValueError):
    pass


class ZoneSyntaxError(ZoneError):
    def __init__(self, line: int, column: int, reason: str):
        super().__init__(f"line {line}, column {column}: {reason}")
        self.line = line
        self.column = column
        self.reason = reason


class MissingSoa(ZoneError):
    pass


class DuplicateSoa(ZoneError):
    pass


@dataclass
class Zone:
    """A zone: its apex, its records (including the single apex SOA), and the
    child cuts delegated away by NS records below the apex."""
    apex: DnsName
    records: list = field(default_factory=list)

    @property
    def soa(self):
        for record in self.records:
            if record.rtype == RType.SOA and record.owner == self.apex:
                return record.rdata
        raise MissingSoa(f"zone {self.apex} has no SOA")

    @property
    def soa_record(self) -> ResourceRecord:
        for record in self.records:
            if record.rtype == RType.SOA and record.owner == self.apex:
                return record
        raise MissingSoa(f"zone {self.apex} has no SOA")

    def delegations(self) -> set[DnsName]:
        return {r.owner for r in self.records
                if r.rtype == RType.NS and r.owner != self.apex}

    def is_glue(self, owner: DnsName) -> bool:
        """True when `owner` lies strictly below a delegation cut."""
        return any(owner != cut and owner.is_subdomain_of(cut)
                   for cut in self.delegations())

    def owners(self) -> set[DnsName]:
        return {r.owner for r in self.records}

    def records_at(self, owner: DnsName, rtype: int | None = None) -> list:
        return [r for r in self.records
                if r.owner == owner and (rtype is None or r.rtype == rtype)]

    def rrsets(self) -> list[RRset]:
        return group_rrsets(self.records)

    def validate(self) -> None:
        soas = [r for r in self.records if r.rtype == RType.SOA]
        if not soas:
            raise MissingSoa(f"zone {self.apex} has no SOA")
        if len(soas) > 1:
            raise DuplicateSoa(f"zone {self.apex} has {len(soas)} SOA records")
        if soas[0].owner != self.apex:
            raise ZoneError(f"SOA owner {soas[0].owner} is not the apex {self.apex}")
        for record in self.records:
            if not record.owner.is_subdomain_of(self.apex):
                raise ZoneError(f"{record.owner} is outside zone {self.apex}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Zone):
            return NotImplemented
        return self.apex == other.apex and Counter(self.records) == Counter(other.records)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    text: str
    column: int
    quoted: bool = False


def _tokenize_entries(stream: TextIO) -> Iterator[tuple[int, bool, list[_Token]]]:
    """Yield (line number, owner-column-blank, tokens) per logical entry.
    Parentheses join physical lines into one entry."""
    tokens: list[_Token] = []
    entry_line = 0
    entry_blank = False
    depth = 0
    for lineno, line in enumerate(stream, start=1):
        i, n = 0, len(line)
        if depth == 0 and line.strip():
            entry_line = lineno
            entry_blank = line[0] in " \t"
        while i < n:
            ch = line[i]
            if ch in " \t\r\n":
                i += 1
            elif ch == ";":
                break
            elif ch == "(":
                depth += 1
                i += 1
            elif ch == ")":
                if depth == 0:
                    raise ZoneSyntaxError(lineno, i + 1, "unbalanced ')'")
                depth -= 1
                i += 1
            elif ch == '"':
                j = i + 1
                while j < n and line[j] != '"':
                    j += 1
                if j >= n:
                    raise ZoneSyntaxError(lineno, i + 1, "unterminated string")
                tokens.append(_Token(line[i + 1 : j], i + 1, quoted=True))
                i = j + 1
            else:
                j = i
                while j < n and line[j] not in ' \t\r\n;()"':
                    j += 1
                tokens.append(_Token(line[i:j], i + 1))
                i = j
        if depth == 0 and tokens:
            yield entry_line, entry_blank, tokens
            tokens = []
    if depth > 0:
        raise ZoneSyntaxError(entry_line, 1, "unbalanced '('")
    if tokens:
        yield entry_line, entry_blank, tokens


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _parse_ttl(text: str) -> int | None:
    return int(text) if text.isdigit() else None


def parse_record_tokens(tokens: list[_Token], lineno: int, origin: DnsName,
                        owner: DnsName | None, default_ttl: int | None):
    """Parse one `[owner] [ttl] [class] type rdata...` entry."""
    idx = 0
    if owner is None:
        try:
            owner = DnsName.from_text(tokens[0].text, origin)
        except NameError_ as exc:
            raise ZoneSyntaxError(lineno, tokens[0].column, str(exc)) from exc
        idx = 1
    ttl = None
    rclass = RClass.IN
    rtype = None
    while idx < len(tokens):
        token = tokens[idx]
        maybe_ttl = _parse_ttl(token.text)
        if maybe_ttl is not None and ttl is None:
            ttl = maybe_ttl
            idx += 1
            continue
        if token.text.upper() == "IN":
            idx += 1
            continue
        try:
            rtype = rtype_from_text(token.text)
        except ValueError as exc:
            raise ZoneSyntaxError(lineno, token.column, str(exc)) from exc
        idx += 1
        break
    if rtype is None:
        raise ZoneSyntaxError(lineno, tokens[-1].column, "missing record type")
    if ttl is None:
        ttl = default_ttl
    if ttl is None:
        raise ZoneSyntaxError(lineno, tokens[0].column,
                              "no TTL given and no $TTL in effect")
    rdata_tokens = [t.text for t in tokens[idx:]]
    if not rdata_tokens:
        raise ZoneSyntaxError(lineno, tokens[-1].column, "missing rdata")
    try:
        rdata = rdata_from_text(rtype, rdata_tokens, origin)
    except (RdataError, NameError_, ValueError) as exc:
        raise ZoneSyntaxError(lineno, tokens[idx].column, str(exc)) from exc
    return ResourceRecord(owner, rtype, rclass, ttl, rdata)


def parse_record_line(text: str, origin: DnsName | None = None,
                      default_ttl: int = 0) -> ResourceRecord:
    """Parse a single master-format record line (key files, trust anchors,
    root hints)."""
    entries = list(_tokenize_entries(io.StringIO(text)))
    if len(entries) != 1:
        raise ZoneSyntaxError(1, 1, "expected exactly one record")
    lineno, _, tokens = entries[0]
    return parse_record_tokens(tokens, lineno, origin, None, default_ttl)


class _Parser:
    def __init__(self, origin: DnsName, include_base: Path | None):
        self.origin = origin
        self.include_base = include_base
        self.default_ttl: int | None = None
        self.last_owner: DnsName | None = None
        self.records: list[ResourceRecord] = []

    def feed(self, stream: TextIO) -> None:
        for lineno, blank_owner, tokens in _tokenize_entries(stream):
            head = tokens[0].text
            if head.startswith("$"):
                self._directive(lineno, tokens)
                continue
            owner = None
            if blank_owner:
                owner = self.last_owner
                if owner is None:
                    raise ZoneSyntaxError(lineno, 1, "no previous owner to inherit")
            record = parse_record_tokens(tokens, lineno, self.origin, owner,
                                         self.default_ttl)
            self.last_owner = record.owner
            self.records.append(record)

    def _directive(self, lineno: int, tokens: list[_Token]) -> None:
        name = tokens[0].text.upper()
        args = tokens[1:]
        if name == "$ORIGIN":
            if len(args) != 1:
                raise ZoneSyntaxError(lineno, tokens[0].column, "$ORIGIN needs a name")
            self.origin = DnsName.from_text(args[0].text, self.origin)
        elif name == "$TTL":
            if len(args) != 1 or _parse_ttl(args[0].text) is None:
                raise ZoneSyntaxError(lineno, tokens[0].column, "$TTL needs seconds")
            self.default_ttl = int(args[0].text)
        elif name == "$INCLUDE":
            if self.include_base is None:
                raise ZoneSyntaxError(lineno, tokens[0].column,
                                      "$INCLUDE requires a file-based parse")
            if len(args) not in (1, 2):
                raise ZoneSyntaxError(lineno, tokens[0].column, "$INCLUDE needs a path")
            path = self.include_base / args[0].text
            saved = self.origin
            if len(args) == 2:
                self.origin = DnsName.from_text(args[1].text, self.origin)
            with open(path, encoding="ascii") as handle:
                self.feed(handle)
            self.origin = saved
        else:
            raise ZoneSyntaxError(lineno, tokens[0].column, f"unknown directive {name}")


def parse_zone_file(text: str | TextIO, origin: DnsName | str,
                    include_base: Path | str | None = None) -> Zone:
    """Parse master-file text into a Zone rooted at `origin`."""
    if isinstance(origin, str):
        origin = DnsName.from_text(origin)
    if isinstance(text, str):
        text = io.StringIO(text)
    parser = _Parser(origin, Path(include_base) if include_base else None)
    parser.feed(text)
    zone = Zone(origin, parser.records)
    zone.validate()
    return zone


def load_zone_file(path: Path | str, origin: DnsName | str) -> Zone:
    path = Path(path)
    with open(path, encoding="ascii") as handle:
        return parse_zone_file(handle, origin, include_base=path.parent)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _wrap_base64(first_part: str, b64: str, comment: str = "") -> str:
    lines = [f"{first_part} ("]
    for i in range(0, len(b64), 56):
        lines.append("\t\t" + b64[i : i + 56])
    lines.append("\t\t)" + (f" ; {comment}" if comment else ""))
    return "\n".join(lines)


def _format_record(record: ResourceRecord, origin: DnsName) -> str:
    owner = record.owner.relativize(origin)
    lead = f"{owner}\t{record.ttl}\tIN\t{RType(record.rtype).name}"
    rdata = record.rdata
    if record.rtype == RType.DNSKEY:
        head = f"{lead}\t{rdata.flags} {rdata.protocol} {rdata.algorithm}"
        b64 = base64.b64encode(rdata.public_key).decode("ascii")
        return _wrap_base64(head, b64, f"key id = {rdata.key_tag()}")
    if record.rtype == RType.RRSIG:
        head = (f"{lead}\t{rtype_to_text(rdata.type_covered)} {rdata.algorithm} "
                f"{rdata.labels} {rdata.original_ttl} {timestamp_to_text(rdata.expiration)} "
                f"{timestamp_to_text(rdata.inception)} {rdata.key_tag} "
                f"{rdata.signer_name.to_text()}")
        return _wrap_base64(head, base64.b64encode(rdata.signature).decode("ascii"))
    return f"{lead}\t{rdata.to_text(origin)}"


def serialize_zone(zone: Zone) -> str:
    """Emit master-file text: SOA first, then records grouped by owner in
    canonical order."""
    lines = [f"$ORIGIN {zone.apex.to_text()}"]
    soa = zone.soa_record
    lines.append(_format_record(soa, zone.apex))
    rest = [r for r in zone.records if r is not soa]
    rest.sort(key=lambda r: (r.owner.canonical_key(), r.rtype,
                             r.rdata.canonical_wire()))
    lines.extend(_format_record(r, zone.apex) for r in rest)
    return "\n".join(lines) + "\n"
