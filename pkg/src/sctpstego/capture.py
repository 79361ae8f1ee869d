"""SCTS capture container.

Layout: ``b"SCTS"``, a version byte (1), then records.  Each record is a
32-bit big-endian length of the remainder, a 64-bit tick, the source address
(1-byte length + bytes), the destination address (same) and the packet bytes.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass
from pathlib import Path

from . import wire
from .errors import DecodeFailure, IoFailure, WireError
from .simnet import DELIVER, SimEvent
from .wire import SctpPacket

MAGIC = b"SCTS"
VERSION = 1
DEFAULT_SRC = ipaddress.ip_address("10.0.0.1")
DEFAULT_DST = ipaddress.ip_address("10.0.1.1")


@dataclass(frozen=True)
class Record:
    tick: int
    src: ipaddress.IPv4Address | ipaddress.IPv6Address
    dst: ipaddress.IPv4Address | ipaddress.IPv6Address
    data: bytes

    @property
    def packet(self) -> SctpPacket:
        return wire.decode_packet(self.data)

    @property
    def path(self) -> tuple:
        return self.src, self.dst

    @classmethod
    def of(cls, tick: int, pkt: SctpPacket, src=DEFAULT_SRC, dst=DEFAULT_DST) -> "Record":
        return cls(tick, ipaddress.ip_address(src), ipaddress.ip_address(dst), wire.encode_packet(pkt))


def encode_capture(records) -> bytes:
    out = [MAGIC, bytes([VERSION])]
    for r in records:
        body = struct.pack("!Q", r.tick)
        for a in (r.src, r.dst):
            body += bytes([len(a.packed)]) + a.packed
        body += r.data
        out.append(struct.pack("!I", len(body)) + body)
    return b"".join(out)


def decode_capture(data: bytes) -> list[Record]:
    if data[:4] != MAGIC:
        raise DecodeFailure("not an SCTS capture")
    if len(data) < 5 or data[4] != VERSION:
        raise DecodeFailure("unsupported capture version")
    pos = 5
    out = []
    while pos < len(data):
        if pos + 4 > len(data):
            raise DecodeFailure("truncated record header")
        (length,) = struct.unpack_from("!I", data, pos)
        pos += 4
        end = pos + length
        if end > len(data) or length < 10:
            raise DecodeFailure("record overruns the capture")
        (tick,) = struct.unpack_from("!Q", data, pos)
        p = pos + 8
        addrs = []
        for _ in range(2):
            alen = data[p]
            if alen not in (4, 16) or p + 1 + alen > end:
                raise DecodeFailure("bad address length")
            addrs.append(ipaddress.ip_address(data[p + 1:p + 1 + alen]))
            p += 1 + alen
        out.append(Record(tick, addrs[0], addrs[1], data[p:end]))
        pos = end
    return out


def write_capture(path, records) -> None:
    try:
        Path(path).write_bytes(encode_capture(records))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_capture(path) -> list[Record]:
    try:
        return decode_capture(Path(path).read_bytes())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def records_from_events(events) -> list[Record]:
    """Packets as seen on the wire at their arrival, in event order."""
    out = []
    for ev in events:
        if isinstance(ev, SimEvent) and ev.kind == DELIVER:
            out.append(Record(ev.tick, ev.path[0], ev.path[1], ev.raw()))
    return out


def packets_of(records) -> list[SctpPacket]:
    out = []
    for i, r in enumerate(records):
        try:
            out.append(r.packet)
        except WireError as exc:
            raise DecodeFailure(f"record {i}: {exc}") from exc
    return out
