"""Authoritative query answering and the socket-facing server.

Answer assembly is pure: the same logic backs the real UDP/TCP server, the
in-memory simulated network, and the validator's fetch path in tests.
"""

from __future__ import annotations

import socketserver
import struct
import threading
from dataclasses import replace

from .message import DnsMessage, Edns, Rcode, decode_message, encode_message
from .names import DnsName, canonical_compare
from .records import ResourceRecord, RType
from .zonefile import Zone

SERVER_UDP_PAYLOAD = 4096
PLAIN_UDP_LIMIT = 512


class ZoneIndex:
    """Owner/type lookup tables over a zone, built once per load."""

    def __init__(self, zone: Zone):
        self.zone = zone
        self.apex = zone.apex
        self._by_owner: dict[DnsName, dict[int, list[ResourceRecord]]] = {}
        for record in zone.records:
            self._by_owner.setdefault(record.owner, {}) \
                .setdefault(record.rtype, []).append(record)
        self.delegations = frozenset(zone.delegations())
        self.soa_record = zone.soa_record
        self.nsec_records = [r for r in zone.records if r.rtype == RType.NSEC]

    def records_at(self, owner: DnsName, rtype: int | None = None) -> list:
        types = self._by_owner.get(owner)
        if types is None:
            return []
        if rtype is None:
            return [r for records in types.values() for r in records]
        return types.get(rtype, [])


def _as_index(zone: Zone | ZoneIndex) -> ZoneIndex:
    return zone if isinstance(zone, ZoneIndex) else ZoneIndex(zone)


def find_zone(zones: list, qname: DnsName) -> ZoneIndex | None:
    best = None
    for zone in zones:
        if qname.is_subdomain_of(zone.apex):
            if best is None or zone.apex.label_count() > best.apex.label_count():
                best = zone
    return _as_index(best) if best is not None else None


def _covering_nsec(zone: ZoneIndex, qname: DnsName) -> ResourceRecord | None:
    for record in zone.nsec_records:
        owner, nxt = record.owner, record.rdata.next_name
        if owner == qname:
            return record
        if canonical_compare(owner, qname) < 0 and (
                canonical_compare(qname, nxt) < 0
                or canonical_compare(nxt, owner) <= 0):
            return record
    return None


def _rrsigs_covering(zone: ZoneIndex, owner: DnsName, rtype: int) -> list[ResourceRecord]:
    return [r for r in zone.records_at(owner, RType.RRSIG)
            if r.rdata.type_covered == rtype]


def _add_with_sigs(zone: ZoneIndex, section: list, owner: DnsName, rtype: int,
                   dnssec: bool) -> bool:
    records = zone.records_at(owner, rtype)
    if not records:
        return False
    section.extend(records)
    if dnssec:
        section.extend(_rrsigs_covering(zone, owner, rtype))
    return True


def _deepest_cut(zone: ZoneIndex, qname: DnsName) -> DnsName | None:
    best = None
    for cut in zone.delegations:
        if qname.is_subdomain_of(cut):
            if best is None or cut.label_count() > best.label_count():
                best = cut
    return best


def answer_authoritative(query: DnsMessage, zones: list) -> DnsMessage:
    """Answer one query from authoritative data (zones may be pre-indexed).

    Exact matches get aa answers with RRSIGs when the DO bit is set; names
    below a delegation get referrals; absent names get NXDOMAIN with the SOA
    and, under DNSSEC, the covering NSEC witness.
    """
    reply = DnsMessage(id=query.id,
                       flags=frozenset({"qr"} | (query.flags & {"rd"})),
                       questions=list(query.questions))
    if query.edns:
        reply.edns = Edns(version=0, do=query.edns.do,
                          udp_payload=SERVER_UDP_PAYLOAD)
    q = query.question
    if q is None:
        reply.rcode = Rcode.FORMERR
        return reply
    dnssec = query.do_bit
    zone = find_zone(zones, q.name)
    if zone is None:
        reply.rcode = Rcode.REFUSED
        return reply

    cut = _deepest_cut(zone, q.name)
    if cut is not None and not (q.name == cut and q.qtype == RType.DS):
        # Referral toward the child zone; never authoritative.
        reply.authority.extend(zone.records_at(cut, RType.NS))
        if dnssec:
            if not _add_with_sigs(zone, reply.authority, cut, RType.DS, dnssec):
                nsec = _covering_nsec(zone, cut)
                if nsec is not None:
                    reply.authority.append(nsec)
                    reply.authority.extend(
                        _rrsigs_covering(zone, nsec.owner, RType.NSEC))
        for ns in zone.records_at(cut, RType.NS):
            target = ns.rdata.target
            if target.is_subdomain_of(zone.apex):
                reply.additional.extend(zone.records_at(target, RType.A))
        return reply

    reply.flags = reply.flags | {"aa"}
    if _add_with_sigs(zone, reply.answers, q.name, q.qtype, dnssec):
        return reply
    if q.qtype != RType.CNAME and _add_with_sigs(zone, reply.answers, q.name,
                                                 RType.CNAME, dnssec):
        return reply

    # Negative answer: NODATA when the name exists, NXDOMAIN otherwise.
    soa = zone.soa_record
    reply.authority.append(soa)
    if dnssec:
        reply.authority.extend(_rrsigs_covering(zone, zone.apex, RType.SOA))
    if not zone.records_at(q.name):
        reply.rcode = Rcode.NXDOMAIN
    if dnssec:
        nsec = _covering_nsec(zone, q.name)
        if nsec is not None:
            reply.authority.append(nsec)
            reply.authority.extend(_rrsigs_covering(zone, nsec.owner, RType.NSEC))
    return reply


def encode_with_limit(msg: DnsMessage, limit: int | None) -> bytes:
    """Encode for UDP delivery: when the message exceeds the negotiated
    payload size, mark it truncated and drop the record sections."""
    wire = encode_message(msg)
    if limit is None or len(wire) <= limit:
        return wire
    truncated = replace(msg, flags=msg.flags | {"tc"}, answers=[],
                        authority=[], additional=[])
    return encode_message(truncated)


def udp_limit_for(query: DnsMessage) -> int:
    if query.edns:
        return max(PLAIN_UDP_LIMIT, query.edns.udp_payload)
    return PLAIN_UDP_LIMIT


class AuthoritativeService:
    """Wire-level request handling shared by every transport flavor."""

    def __init__(self, zones: list[Zone]):
        self.zones = [_as_index(z) for z in zones]

    def handle_wire(self, wire: bytes, via_tcp: bool) -> bytes | None:
        try:
            query = decode_message(wire)
        except ValueError:
            return encode_message(DnsMessage(flags=frozenset({"qr"}),
                                             rcode=Rcode.FORMERR))
        reply = answer_authoritative(query, self.zones)
        if via_tcp:
            return encode_message(reply)
        return encode_with_limit(reply, udp_limit_for(query))


class GatewayService(AuthoritativeService):
    """Authoritative for its zones; recursion-desired queries for anything
    else go through the attached resolver (when one is configured)."""

    def __init__(self, zones: list[Zone], resolver=None):
        super().__init__(zones)
        self.resolver = resolver

    def handle_wire(self, wire: bytes, via_tcp: bool) -> bytes | None:
        try:
            query = decode_message(wire)
        except ValueError:
            return encode_message(DnsMessage(flags=frozenset({"qr"}),
                                             rcode=Rcode.FORMERR))
        q = query.question
        if (q is not None and self.resolver is not None
                and "rd" in query.flags
                and find_zone(self.zones, q.name) is None):
            reply = self.resolver.resolve(query)
        else:
            reply = answer_authoritative(query, self.zones)
        if via_tcp:
            return encode_message(reply)
        return encode_with_limit(reply, udp_limit_for(query))


class _UdpHandler(socketserver.BaseRequestHandler):
    def handle(self):
        wire, sock = self.request
        reply = self.server.service.handle_wire(wire, via_tcp=False)
        if reply is not None:
            sock.sendto(reply, self.client_address)


class _TcpHandler(socketserver.BaseRequestHandler):
    def handle(self):
        header = self._read_exact(2)
        if header is None:
            return
        (length,) = struct.unpack(">H", header)
        wire = self._read_exact(length)
        if wire is None:
            return
        reply = self.server.service.handle_wire(wire, via_tcp=True)
        if reply is not None:
            self.request.sendall(struct.pack(">H", len(reply)) + reply)

    def _read_exact(self, count: int) -> bytes | None:
        data = b""
        while len(data) < count:
            chunk = self.request.recv(count - len(data))
            if not chunk:
                return None
            data += chunk
        return data


class _UdpServer(socketserver.ThreadingUDPServer):
    daemon_threads = True


class _TcpServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class DnsServer:
    """Server listening on UDP and TCP at the same address. Accepts a list of
    zones or any service object exposing handle_wire."""

    def __init__(self, zones, address: str = "127.0.0.1", port: int = 5353):
        self.service = (zones if hasattr(zones, "handle_wire")
                        else AuthoritativeService(zones))
        self._udp = _UdpServer((address, port), _UdpHandler)
        self._udp.service = self.service
        actual_port = self._udp.server_address[1]
        self._tcp = _TcpServer((address, actual_port), _TcpHandler)
        self._tcp.service = self.service
        self.address = address
        self.port = actual_port
        self._threads: list[threading.Thread] = []

    def reload(self, zones: list[Zone]) -> None:
        self.service.zones = [_as_index(z) for z in zones]

    def start(self) -> None:
        for server in (self._udp, self._tcp):
            thread = threading.Thread(target=server.serve_forever, daemon=True)
            thread.start()
            self._threads.append(thread)

    def shutdown(self) -> None:
        for server in (self._udp, self._tcp):
            server.shutdown()
            server.server_close()

    def serve_forever(self) -> None:
        self.start()
        for thread in self._threads:
            thread.join()
