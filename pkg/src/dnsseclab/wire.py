"""Low-level wire helpers: name encoding and compression-pointer resolution."""

from __future__ import annotations

from .names import MAX_LABEL, MAX_NAME, DnsName


class WireError(ValueError):
    pass


class Truncated(WireError):
    """Input ended in the middle of a structure."""


class BadPointer(WireError):
    """A compression pointer points forward or its chain does not terminate."""


class LabelTooLong(WireError):
    """A label length is invalid or the assembled name exceeds 255 octets."""


def read_name(data: bytes, offset: int) -> tuple[DnsName, int]:
    """Read a possibly-compressed name starting at `offset`.

    Returns the name and the offset just past its in-place encoding.
    Pointers must target strictly earlier offsets, so chains terminate.
    """
    labels: list[bytes] = []
    total = 1
    end = -1
    pos = offset
    while True:
        if pos >= len(data):
            raise Truncated("name runs past end of message")
        length = data[pos]
        if length == 0:
            pos += 1
            break
        if length & 0xC0 == 0xC0:
            if pos + 1 >= len(data):
                raise Truncated("pointer runs past end of message")
            target = ((length & 0x3F) << 8) | data[pos + 1]
            if target >= pos:
                raise BadPointer(f"pointer at {pos} targets {target} (not backward)")
            if end < 0:
                end = pos + 2
            pos = target
            continue
        if length & 0xC0:
            raise LabelTooLong(f"reserved label type 0x{length:02x}")
        if length > MAX_LABEL:
            raise LabelTooLong(f"label of {length} octets")
        if pos + 1 + length > len(data):
            raise Truncated("label runs past end of message")
        labels.append(data[pos + 1 : pos + 1 + length])
        total += length + 1
        if total > MAX_NAME:
            raise LabelTooLong("assembled name exceeds 255 octets")
        pos += 1 + length
    if end < 0:
        end = pos
    return DnsName(labels), end


def read_exact(data: bytes, offset: int, count: int, what: str) -> bytes:
    if offset + count > len(data):
        raise Truncated(f"{what}: need {count} octets at offset {offset}")
    return data[offset : offset + count]
