import random
import struct

import pytest

from dnsseclab.message import (DnsMessage, Edns, Question, Rcode, TooManyRecords,
                               decode_message, encode_message, make_query)
from dnsseclab.names import DnsName
from dnsseclab.records import (ARdata, ResourceRecord, RrsigRdata, RType,
                               OpaqueRdata)
from dnsseclab.wire import BadPointer, LabelTooLong, Truncated

from conftest import random_message

APEX = DnsName.from_text("domaine.ma.")


def test_minimal_header_encoding():
    wire = encode_message(DnsMessage(id=0))
    assert wire == b"\x00" * 12


def test_twelve_zero_bytes_decode():
    msg = decode_message(b"\x00" * 12)
    assert msg.id == 0 and not msg.flags
    assert msg.questions == [] and msg.answers == []
    assert msg.edns is None


def test_edns_opt_advertises_payload_and_do():
    query = make_query(APEX, RType.A, id=42469, edns=Edns(do=True, udp_payload=4096))
    wire = encode_message(query)
    # OPT pseudo-record sits at the end: root, type 41, class 4096, DO in ttl.
    opt = wire[-11:]
    assert opt[0] == 0
    rtype, rclass, ttl, rdlen = struct.unpack(">HHIH", opt[1:])
    assert rtype == RType.OPT and rclass == 4096
    assert ttl & 0x8000
    assert rdlen == 0
    back = decode_message(wire)
    assert back.edns == Edns(version=0, do=True, udp_payload=4096)
    assert back.additional == []


def test_round_trip_200_random_messages():
    rng = random.Random(1234)
    for _ in range(200):
        msg = random_message(rng)
        assert decode_message(encode_message(msg)) == msg


def test_query_response_qr_flag():
    query = make_query(APEX, RType.A, rd=True)
    assert not query.is_response
    response = query.with_flags("qr", "aa")
    assert response.is_response
    assert decode_message(encode_message(response)).flags == response.flags


def test_rcode_round_trip():
    for rcode in (Rcode.NOERROR, Rcode.FORMERR, Rcode.SERVFAIL, Rcode.NXDOMAIN,
                  Rcode.REFUSED):
        msg = DnsMessage(id=7, flags=frozenset({"qr"}), rcode=rcode)
        assert decode_message(encode_message(msg)).rcode == rcode


def test_forward_pointer_rejected():
    # Header + a name that is a pointer to an offset beyond its own position.
    wire = b"\x00\x01\x00\x00\x00\x01\x00\x00\x00\x00\x00\x00" + b"\xc0\x20"
    with pytest.raises(BadPointer):
        decode_message(wire)


def test_self_pointer_rejected():
    wire = b"\x00\x01\x00\x00\x00\x01\x00\x00\x00\x00\x00\x00" + b"\xc0\x0c"
    with pytest.raises(BadPointer):
        decode_message(wire)


def test_truncated_inputs():
    with pytest.raises(Truncated):
        decode_message(b"\x00" * 11)
    query = encode_message(make_query(APEX, RType.A))
    with pytest.raises(Truncated):
        decode_message(query[:-3])


def test_reserved_label_type_rejected():
    wire = b"\x00\x00\x00\x00\x00\x01\x00\x00\x00\x00\x00\x00" + b"\x40abc"
    with pytest.raises(LabelTooLong):
        decode_message(wire)


def test_too_many_records():
    msg = DnsMessage(questions=[Question(APEX, RType.A)] * 65536)
    with pytest.raises(TooManyRecords):
        encode_message(msg)


def test_compression_shrinks_repeated_owners():
    records = [ResourceRecord(DnsName.from_text(f"h{i}.domaine.ma."), RType.A, 1,
                              60, ARdata("10.0.0.1")) for i in range(8)]
    msg = DnsMessage(id=1, flags=frozenset({"qr"}),
                     questions=[Question(DnsName.from_text("h0.domaine.ma."), RType.A)],
                     answers=records)
    wire = encode_message(msg)
    uncompressed = 12 + len(encode_message(DnsMessage())) - 12
    total_names = sum(len(r.owner.to_wire()) for r in records)
    assert len(wire) < 12 + 4 + total_names + len(records) * 14 + 4
    assert decode_message(wire) == msg


def test_rrsig_rdata_names_stay_uncompressed():
    # The signer name equals the owner; compression would shrink it, but
    # signed rdata must stay verbatim.
    sig = RrsigRdata(RType.A, 5, 2, 300, 2**31, 0, 1, APEX, b"\x00" * 16)
    record = ResourceRecord(APEX, RType.RRSIG, 1, 300, sig)
    msg = DnsMessage(id=2, flags=frozenset({"qr"}), answers=[record])
    wire = encode_message(msg)
    assert APEX.to_wire() in wire[30:]  # full name inside the RRSIG rdata
    assert decode_message(wire) == msg


def test_unknown_rtype_round_trips_as_opaque():
    record = ResourceRecord(APEX, 99, 1, 60, OpaqueRdata(b"\x01\x02\x03"))
    msg = DnsMessage(id=3, flags=frozenset({"qr"}), answers=[record])
    back = decode_message(encode_message(msg))
    assert back.answers[0].rdata == OpaqueRdata(b"\x01\x02\x03")
    assert back == msg


def test_decode_accepts_compressed_rdata_names():
    # Third-party encoders may compress NS targets; decoding must resolve them.
    header = struct.pack(">HHHHHH", 1, 0x8000, 1, 1, 0, 0)
    qname = APEX.to_wire()
    question = qname + struct.pack(">HH", RType.NS, 1)
    rdata = b"\x02ns\xc0\x0c"  # ns.<pointer to qname>
    answer = b"\xc0\x0c" + struct.pack(">HHIH", RType.NS, 1, 60, len(rdata)) + rdata
    msg = decode_message(header + question + answer)
    assert msg.answers[0].rdata.target == DnsName.from_text("ns.domaine.ma.")


def test_size_reporting_is_callers_concern():
    msg = DnsMessage(id=9, questions=[Question(APEX, RType.A)],
                     edns=Edns(udp_payload=4096))
    assert len(encode_message(msg)) < 4096
