"""Multi-homing channel: bits in the (source, destination) pair of retransmissions.

Each endpoint's alternate addresses (every address except its primary) are
sorted ascending and numbered; the first ``2**floor(log2(n))`` carry
``floor(log2(n))`` bits each.  One retransmission carries the sender-address
code followed by the receiver-address code.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field

from . import wire
from .bits import BitString
from .core import throughput
from .errors import CapacityZero, NoAlternatePath, UnknownAddress
from .simnet import DELIVER, SimEvent, as_address


def _sorted(addrs) -> tuple:
    addrs = [as_address(a) for a in addrs]
    return tuple(sorted(addrs, key=lambda a: (a.version, int(a))))


@dataclass(frozen=True)
class Side:
    primary: ipaddress.IPv4Address | ipaddress.IPv6Address
    alternates: tuple

    @property
    def width(self) -> int:
        return max(len(self.alternates).bit_length() - 1, 0)

    @property
    def usable(self) -> tuple:
        if not self.alternates:
            return (self.primary,)
        return self.alternates[:1 << self.width]

    def address(self, bits: str):
        return self.usable[int(bits, 2) if bits else 0]

    def bits(self, addr) -> str:
        addr = as_address(addr)
        if addr not in self.usable:
            raise UnknownAddress(f"{addr} carries no code")
        return format(self.usable.index(addr), f"0{self.width}b") if self.width else ""


@dataclass(frozen=True)
class PathCode:
    sender: Side
    receiver: Side
    strict: bool = False

    def __post_init__(self):
        if not self.sender.alternates and not self.receiver.alternates:
            raise NoAlternatePath("neither endpoint has an alternate address")
        if self.strict:
            for side in (self.sender, self.receiver):
                n = len(side.alternates)
                if n & (n - 1):
                    raise ValueError(f"{n} alternate addresses is not a power of two")

    @classmethod
    def build(cls, sender_addrs, receiver_addrs, strict: bool = False) -> "PathCode":
        """First address of each list is the primary; the rest are alternates."""
        s = [as_address(a) for a in sender_addrs]
        r = [as_address(a) for a in receiver_addrs]
        return cls(Side(s[0], _sorted(s[1:])), Side(r[0], _sorted(r[1:])), strict)

    @classmethod
    def from_config(cls, cfg, strict: bool = False) -> "PathCode":
        return cls.build(cfg.sender_addrs, cfg.receiver_addrs, strict)

    def reverse(self) -> "PathCode":
        return PathCode(self.receiver, self.sender, self.strict)

    @property
    def n1(self) -> int:
        return len(self.sender.alternates)

    @property
    def n2(self) -> int:
        return len(self.receiver.alternates)

    @property
    def bits_per_event(self) -> int:
        return self.sender.width + self.receiver.width

    @property
    def primary(self) -> tuple:
        return self.sender.primary, self.receiver.primary

    def path_for(self, bits: str) -> tuple:
        w = self.sender.width
        return self.sender.address(bits[:w]), self.receiver.address(bits[w:])

    def bits_for(self, path) -> str:
        return self.sender.bits(path[0]) + self.receiver.bits(path[1])


def mh_embed(code: PathCode, payload) -> tuple[tuple, int]:
    """Path for the next retransmission and the number of payload bits it carries."""
    b = code.bits_per_event
    if b == 0:
        raise CapacityZero("one alternate address per side carries no bits")
    bits, used = BitString(payload).take(b)
    return code.path_for(bits), used


def _path_of(ev):
    return ev.path if isinstance(ev, SimEvent) else ev


def mh_extract(code: PathCode, observed, limit: int | None = None) -> BitString:
    """Concatenated codes of the observed retransmission paths, in order."""
    bits = "".join(code.bits_for(_path_of(ev)) for ev in observed)
    return BitString(bits if limit is None else bits[:limit])


def mh_initiation(marker):
    """Return a function giving the index just after the first *marker* run, or None."""
    marker = [tuple(as_address(a) for a in p) for p in marker]
    if not marker:
        raise ValueError("marker must not be empty")

    def find(observed) -> int | None:
        paths = [tuple(_path_of(ev)) for ev in observed]
        m = len(marker)
        for i in range(len(paths) - m + 1):
            if paths[i:i + m] == marker:
                return i + m
        return None

    return find


def mh_decode(code: PathCode, observed, marker=None, limit: int | None = None) -> BitString:
    """Decode after the marker, or from the first event when no marker is agreed."""
    observed = list(observed)
    start = 0
    if marker:
        start = mh_initiation(marker)(observed)
        if start is None:
            return BitString("")
    return mh_extract(code, observed[start:], limit)


def mh_rate(packets_per_second: float, retransmission_rate: float, code_bits: int) -> float:
    return throughput(code_bits, packets_per_second, retransmission_rate)


# -- simulator integration ------------------------------------------------------

@dataclass
class MultihomeSender:
    """Drives covert path choice for the sender's retransmissions.

    ``mode="active"`` makes the sender drop its own first transmissions on
    the primary path until enough retransmission opportunities exist;
    ``mode="passive"`` waits for network losses.
    """

    code: PathCode
    payload: BitString
    mode: str = "active"
    marker: tuple = ()
    pos: int = 0
    marker_pos: int = 0
    drops: int = 0
    chosen: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("active", "passive"):
            raise ValueError("mode must be 'active' or 'passive'")
        self.payload = BitString(self.payload)
        self.marker = tuple(tuple(as_address(a) for a in p) for p in self.marker)

    @property
    def events_needed(self) -> int:
        b = self.code.bits_per_event
        return len(self.marker) + -(-len(self.payload) // b)

    @property
    def done(self) -> bool:
        return self.marker_pos >= len(self.marker) and self.pos >= len(self.payload)

    def retransmit_path(self, chunk) -> tuple:
        if self.marker_pos < len(self.marker):
            path = self.marker[self.marker_pos]
            self.marker_pos += 1
        elif self.pos < len(self.payload):
            path, used = mh_embed(self.code, self.payload[self.pos:])
            self.pos += used
        else:
            path = self.code.path_for("0" * self.code.bits_per_event)
        self.chosen.append(path)
        return path

    def self_drop(self, chunk) -> bool:
        if self.mode != "active" or self.drops >= self.events_needed:
            return False
        self.drops += 1
        return True

    def attach(self, assoc) -> "MultihomeSender":
        assoc.sender.retransmit_path = self.retransmit_path
        assoc.sender.self_drop = self.self_drop
        return self


@dataclass
class MultihomeReverse:
    """Reverse direction: the receiver picks paths for SACKs reporting duplicates."""

    code: PathCode  # sender side = receiver's addresses
    payload: BitString
    mode: str = "active"
    pos: int = 0

    def __post_init__(self):
        self.payload = BitString(self.payload)

    def transform(self, sack: wire.SackChunk) -> wire.SackChunk:
        if self.mode == "active" and self.pos < len(self.payload) and not sack.dup_tsns:
            return wire.SackChunk(sack.cum_tsn, sack.a_rwnd, sack.gap_blocks, (sack.cum_tsn,))
        return sack

    def path(self, sack: wire.SackChunk, arrival) -> tuple:
        if sack.dup_tsns and self.pos < len(self.payload):
            path, used = mh_embed(self.code, self.payload[self.pos:])
            self.pos += used
            return path
        return arrival[1], arrival[0]

    def attach(self, assoc) -> "MultihomeReverse":
        assoc.receiver.sack_transform = self.transform
        assoc.receiver.sack_path = self.path
        return self


def _arrivals(events, endpoint: str, local: set):
    """(path, packet) for packets reaching *endpoint*, from sim events or capture records."""
    for ev in events:
        if isinstance(ev, SimEvent):
            if ev.kind == DELIVER and ev.endpoint == endpoint:
                yield tuple(ev.path), ev.packet
        elif ev.dst in local:
            yield tuple(ev.path), ev.packet


def observed_retransmissions(events, code: PathCode) -> list[tuple]:
    """Paths of DATA arrivals at the receiver off the primary path, one per TSN in TSN order."""
    local = {code.receiver.primary, *code.receiver.alternates}
    first = {}
    for path, pkt in _arrivals(events, "B", local):
        if path == code.primary:
            continue
        for c in pkt.chunks:
            if isinstance(c, wire.DataChunk):
                first.setdefault(c.tsn, path)
    return [first[t] for t in sorted(first)]


def observed_dup_sacks(events, code: PathCode) -> list[tuple]:
    """Paths of SACKs with duplicate reports that reached the sender off the primary path.

    *code* is the reverse-direction code (receiver addresses as the sending side).
    """
    local = {code.receiver.primary, *code.receiver.alternates}
    out = []
    for path, pkt in _arrivals(events, "A", local):
        if path == code.primary:
            continue
        if any(isinstance(c, wire.SackChunk) and c.dup_tsns for c in pkt.chunks):
            out.append(path)
    return out
