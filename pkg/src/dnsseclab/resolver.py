"""Caching recursive resolver: full iterative resolution with referral
following, TTL cache with security ranking, and chain-of-trust validation."""

from __future__ import annotations

import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, replace
from typing import Callable

from .config import RootHints
from .message import DnsMessage, Edns, Rcode, decode_message, encode_message, make_query
from .names import DnsName
from .records import ResourceRecord, RRset, RType, group_rrsets
from .transport import Timeout, Transport
from .validator import FetchFailure, Security, validate_chain

MAX_NEGATIVE_TTL = 3600


class ResolutionError(Exception):
    pass


class HopLimitExceeded(ResolutionError):
    pass


class ServFail(ResolutionError):
    pass


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------

@dataclass
class CacheEntry:
    key: tuple  # (name, rtype, rclass)
    rrset: RRset | None
    rrsigs: tuple = ()
    inserted_at: float = 0.0
    expires_at: float = 0.0
    security: Security = Security.INSECURE
    negative: DnsMessage | None = None  # response skeleton for negative entries

    def expired(self, now: float) -> bool:
        return now >= self.expires_at

    def remaining_ttl(self, now: float) -> int:
        return max(0, int(self.expires_at - now))


_RANK = {Security.INSECURE: 0, Security.SECURE: 1}


class Cache:
    """TTL cache with LRU eviction. An entry may only replace one of equal or
    lower security rank; Bogus data is never given to `put` at all.
    Get/put are atomic (the server handles requests concurrently)."""

    def __init__(self, capacity: int = 4096):
        self.capacity = capacity
        self._entries: OrderedDict[tuple, CacheEntry] = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: tuple, now: float) -> CacheEntry | None:
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                return None
            if entry.expired(now):
                del self._entries[key]
                return None
            self._entries.move_to_end(key)
            return entry

    def put(self, entry: CacheEntry, now: float) -> bool:
        if entry.security not in _RANK:
            raise ValueError("only Secure or Insecure data is cacheable")
        if entry.expires_at <= now:
            return False
        with self._lock:
            old = self._entries.get(entry.key)
            if old is not None and not old.expired(now) \
                    and _RANK[entry.security] < _RANK[old.security]:
                return False
            self._entries[entry.key] = entry
            self._entries.move_to_end(entry.key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
            return True

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def entries(self) -> list[CacheEntry]:
        with self._lock:
            return list(self._entries.values())


# ---------------------------------------------------------------------------
# Iterative resolution
# ---------------------------------------------------------------------------

def _classify(msg: DnsMessage) -> str:
    if "aa" in msg.flags or msg.rcode != Rcode.NOERROR:
        return "final"
    if msg.answers:
        return "final"
    if any(r.rtype == RType.NS for r in msg.authority):
        return "referral"
    return "final"


def _referral_targets(msg: DnsMessage) -> list[str]:
    ns_targets = {r.rdata.target for r in msg.authority if r.rtype == RType.NS}
    return [r.rdata.address for r in msg.additional
            if r.rtype == RType.A and r.owner in ns_targets]


def resolve_iterative(qname: DnsName, qtype: int, servers: list[str],
                      transport: Transport, *, do: bool = True,
                      hop_limit: int = 16, udp_payload: int = 4096,
                      on_response: Callable[[DnsMessage], None] | None = None,
                      ) -> DnsMessage:
    """Follow referrals from the given servers down to an authoritative
    answer. Truncated UDP replies are retried over TCP against the same
    server before the response is interpreted."""
    candidates = list(servers)
    for _ in range(hop_limit):
        if not candidates:
            raise ServFail(f"no reachable server for {qname}")
        query = make_query(qname, qtype, id=transport.new_txid(),
                           edns=Edns(do=do, udp_payload=udp_payload))
        wire = encode_message(query)
        msg = None
        for address in candidates:
            try:
                reply_wire = transport.query(address, wire)
            except Timeout:
                continue
            msg = decode_message(reply_wire)
            if "tc" in msg.flags:
                msg = decode_message(transport.query(address, wire, tcp=True))
            break
        if msg is None:
            raise Timeout(f"all servers timed out for {qname}")
        if on_response is not None:
            on_response(msg)
        if _classify(msg) == "final":
            return msg
        candidates = _referral_targets(msg)
    raise HopLimitExceeded(f"{qname} not resolved within the hop limit")


# ---------------------------------------------------------------------------
# Recursive resolver
# ---------------------------------------------------------------------------

@dataclass
class ResolverConfig:
    dnssec_enabled: bool = False
    anchors: tuple = ()
    hop_limit: int = 16
    upstream_do: bool = True


class RecursiveResolver:
    """Does all the work for a client: cache, iteration, validation."""

    def __init__(self, hints: RootHints | list[str], transport: Transport,
                 cache: Cache | None = None,
                 config: ResolverConfig | None = None,
                 clock: Callable[[], float] = time.time):
        self.hint_addresses = (hints.addresses()
                               if isinstance(hints, RootHints) else list(hints))
        if not self.hint_addresses:
            raise ValueError("recursion needs at least one hint address")
        self.transport = transport
        self.cache = cache if cache is not None else Cache()
        self.config = config or ResolverConfig()
        self.clock = clock

    # -- public entry points ---------------------------------------------

    def resolve(self, query: DnsMessage) -> DnsMessage:
        q = query.question
        if q is None:
            return replace(query, flags=query.flags | {"qr"}, rcode=Rcode.FORMERR)
        now = self.clock()
        key = (q.name, q.qtype, q.qclass)
        entry = self.cache.get(key, now)
        if entry is not None:
            return self._reply_from_cache(query, entry, now)
        try:
            upstream = self._resolve_upstream(q.name, q.qtype, now)
        except (ResolutionError, Timeout, FetchFailure):
            return self._servfail(query)
        return self._finish(query, upstream, now)

    def resolve_name(self, qname: DnsName, qtype: int = RType.A,
                     do: bool = False) -> DnsMessage:
        edns = Edns(do=True) if do else None
        return self.resolve(make_query(qname, qtype, id=self.transport.new_txid(),
                                       rd=True, edns=edns))

    # -- internals ---------------------------------------------------------

    def _starting_servers(self, qname: DnsName, now: float) -> list[str]:
        """Start iteration at the deepest cached delegation for the name;
        this is what a poisoned NS RRset hijacks."""
        name = qname
        while name.label_count() > 0:
            entry = self.cache.get((name, RType.NS, 1), now)
            if entry is not None and entry.rrset is not None:
                addresses = []
                for rdata in entry.rrset.rdatas:
                    glue = self.cache.get((rdata.target, RType.A, 1), now)
                    if glue is not None and glue.rrset is not None:
                        addresses.extend(a.address for a in glue.rrset.rdatas)
                if addresses:
                    return addresses
            name = name.parent()
        return self.hint_addresses

    def _resolve_upstream(self, qname: DnsName, qtype: int, now: float):
        referrals: list[DnsMessage] = []
        msg = resolve_iterative(
            qname, qtype, self._starting_servers(qname, now), self.transport,
            do=self.config.upstream_do or self.config.dnssec_enabled,
            hop_limit=self.config.hop_limit,
            on_response=referrals.append)
        security = Security.INSECURE
        if self.config.dnssec_enabled:
            outcome = validate_chain(msg, qname, qtype,
                                     list(self.config.anchors),
                                     self._validation_fetch(), int(now))
            if outcome.status is Security.BOGUS:
                raise ServFail(f"validation failed: {outcome.reason}")
            security = outcome.status
        else:
            # Referral infrastructure is only trusted (and cached) when no
            # validation is in force; a validating resolver keeps only data
            # it has checked.
            for referral in referrals[:-1]:
                self._cache_referral(referral, now)
        self._cache_response(qname, qtype, msg, security, now)
        return msg, security

    def _validation_fetch(self):
        memo: dict[tuple, DnsMessage] = {}

        def fetch(name: DnsName, rtype: int) -> DnsMessage:
            key = (name, rtype)
            if key not in memo:
                memo[key] = resolve_iterative(
                    name, rtype, self.hint_addresses, self.transport,
                    do=True, hop_limit=self.config.hop_limit)
            return memo[key]

        return fetch

    def _cache_referral(self, msg: DnsMessage, now: float) -> None:
        infrastructure = [r for r in msg.authority if r.rtype == RType.NS]
        infrastructure += [r for r in msg.additional if r.rtype == RType.A]
        for rrset in group_rrsets(infrastructure):
            self.cache.put(CacheEntry(
                key=(rrset.owner, rrset.rtype, rrset.rclass), rrset=rrset,
                inserted_at=now, expires_at=now + rrset.ttl,
                security=Security.INSECURE), now)

    def _cache_response(self, qname: DnsName, qtype: int, msg: DnsMessage,
                        security: Security, now: float) -> None:
        if msg.rcode not in (Rcode.NOERROR, Rcode.NXDOMAIN):
            return
        if msg.answers:
            sigs = [r for r in msg.answers if r.rtype == RType.RRSIG]
            for rrset in group_rrsets(r for r in msg.answers
                                      if r.rtype != RType.RRSIG):
                covering = tuple(s for s in sigs
                                 if s.owner == rrset.owner
                                 and s.rdata.type_covered == rrset.rtype)
                entry = CacheEntry(key=(rrset.owner, rrset.rtype, rrset.rclass),
                                   rrset=rrset, rrsigs=covering,
                                   inserted_at=now, expires_at=now + rrset.ttl,
                                   security=security)
                self.cache.put(entry, now)
                if rrset.owner == qname and rrset.rtype != qtype:
                    self.cache.put(replace(entry, key=(qname, qtype, 1)), now)
            return
        # Negative answer: cache the skeleton under the query key.
        soa = next((r for r in msg.authority if r.rtype == RType.SOA), None)
        ttl = min(soa.rdata.minimum, MAX_NEGATIVE_TTL) if soa else 60
        skeleton = DnsMessage(rcode=msg.rcode, authority=list(msg.authority))
        self.cache.put(CacheEntry(key=(qname, qtype, 1), rrset=None,
                                  inserted_at=now, expires_at=now + ttl,
                                  security=security, negative=skeleton), now)

    def _reply_from_cache(self, query: DnsMessage, entry: CacheEntry,
                          now: float) -> DnsMessage:
        reply = self._base_reply(query)
        if entry.security is Security.SECURE and self.config.dnssec_enabled:
            reply.flags = reply.flags | {"ad"}
        if entry.negative is not None:
            reply.rcode = entry.negative.rcode
            reply.authority = [r for r in entry.negative.authority
                               if query.do_bit or r.rtype not in
                               (RType.RRSIG, RType.NSEC)]
            return reply
        ttl = entry.remaining_ttl(now)
        reply.answers = [replace(r, ttl=ttl) for r in entry.rrset.records()]
        if query.do_bit:
            reply.answers.extend(replace(r, ttl=ttl) for r in entry.rrsigs)
        return reply

    def _finish(self, query: DnsMessage, upstream, now: float) -> DnsMessage:
        msg, security = upstream
        reply = self._base_reply(query)
        reply.rcode = msg.rcode
        keep_dnssec = query.do_bit
        q = query.question

        def visible(record: ResourceRecord) -> bool:
            if keep_dnssec or record.rtype == q.qtype:
                return True
            return record.rtype not in (RType.RRSIG, RType.NSEC, RType.DNSKEY)

        reply.answers = [r for r in msg.answers if visible(r)]
        reply.authority = [r for r in msg.authority if visible(r)]
        if security is Security.SECURE and self.config.dnssec_enabled:
            reply.flags = reply.flags | {"ad"}
        return reply

    def _base_reply(self, query: DnsMessage) -> DnsMessage:
        reply = DnsMessage(id=query.id,
                           flags=frozenset({"qr", "ra"} | (query.flags & {"rd"})),
                           questions=list(query.questions))
        if query.edns:
            reply.edns = Edns(version=0, do=query.edns.do, udp_payload=4096)
        return reply

    def _servfail(self, query: DnsMessage) -> DnsMessage:
        reply = self._base_reply(query)
        reply.rcode = Rcode.SERVFAIL
        return reply
