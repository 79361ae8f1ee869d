"""Content-modification channels: payload bits substituted into header fields.

Each of the thirteen channels is described by a :class:`FieldChannelSpec`
and implemented by a small accessor that knows how to find the carrier in a
packet, read the target bits and write them back.  Embedding is MSB-first
and left-aligned; a short final fragment is zero-padded on the right.
"""

from __future__ import annotations

import ipaddress
import random
import struct
from dataclasses import dataclass, replace

from . import wire
from .bits import BitString
from .core import ChannelId, capacity
from .errors import CapacityZero, CarrierAbsent, ConstraintViolation
from .wire import SctpPacket


@dataclass(frozen=True)
class AssocContext:
    """Association facts a channel may need beyond the packet itself.

    ``recent_tsns`` is the S2 window (oldest first); when omitted the window is
    the three TSNs ending at the SACK's cumulative ack.  ``key_count`` is the
    number of shared keys configured for A1.
    """

    key_count: int | None = None
    recent_tsns: tuple[int, ...] | None = None


@dataclass(frozen=True)
class FieldChannelSpec:
    channel: ChannelId
    carrier: str
    field: str
    width_bits: int | str
    placement: str
    constraints: str = ""
    plausible: bool = False  # VP1 only: keep addresses in public unicast space


# Loc = (chunk index, parameter index or None)
Loc = tuple[int, "int | None"]


def _chunk_locs(pkt: SctpPacket, pred) -> list[Loc]:
    return [(i, None) for i, c in enumerate(pkt.chunks) if pred(c)]


def _param_locs(pkt: SctpPacket, chunk_pred, param_pred) -> list[Loc]:
    out = []
    for i, c in enumerate(pkt.chunks):
        if chunk_pred(c):
            out.extend((i, j) for j, p in enumerate(c.params) if param_pred(p))
    return out


def _param(pkt: SctpPacket, loc: Loc) -> wire.VarParam:
    i, j = loc
    return pkt.chunks[i].params[j]


def _set_param(pkt: SctpPacket, loc: Loc, param: wire.VarParam) -> SctpPacket:
    i, j = loc
    chunk = pkt.chunks[i]
    params = list(chunk.params)
    params[j] = param
    return pkt.replace_chunk(i, replace(chunk, params=tuple(params)))


def _set_chunk(pkt: SctpPacket, loc: Loc, **changes) -> SctpPacket:
    i, _ = loc
    return pkt.replace_chunk(i, replace(pkt.chunks[i], **changes))


class _Accessor:
    def carriers(self, pkt, spec, ctx) -> list[Loc]:
        raise NotImplementedError

    def width(self, pkt, loc, spec, ctx) -> int:
        return spec.width_bits

    def read(self, pkt, loc, spec, ctx) -> int:
        raise NotImplementedError

    def write(self, pkt, loc, spec, ctx, value: int) -> SctpPacket:
        raise NotImplementedError

    def check(self, pkt, loc, spec, ctx, value: int, width: int) -> None:
        pass


def _is_init(c) -> bool:
    return isinstance(c, wire.InitChunk)


class _InitiateTag(_Accessor):
    def carriers(self, pkt, spec, ctx):
        return _chunk_locs(pkt, _is_init)

    def read(self, pkt, loc, spec, ctx):
        return pkt.chunks[loc[0]].initiate_tag

    def write(self, pkt, loc, spec, ctx, value):
        return _set_chunk(pkt, loc, initiate_tag=value)

    def check(self, pkt, loc, spec, ctx, value, width):
        if value == 0:
            raise ConstraintViolation("Initiate Tag may not be zero")


class _InboundStreams(_Accessor):
    def carriers(self, pkt, spec, ctx):
        return _chunk_locs(pkt, _is_init)

    def read(self, pkt, loc, spec, ctx):
        return pkt.chunks[loc[0]].inbound_streams >> 8

    def write(self, pkt, loc, spec, ctx, value):
        low = pkt.chunks[loc[0]].inbound_streams & 0xFF
        return _set_chunk(pkt, loc, inbound_streams=(value << 8) | low)

    def check(self, pkt, loc, spec, ctx, value, width):
        if (value << 8) | (pkt.chunks[loc[0]].inbound_streams & 0xFF) == 0:
            raise ConstraintViolation("Number of Inbound Streams must stay >= 1")


class _Ssn(_Accessor):
    def carriers(self, pkt, spec, ctx):
        return _chunk_locs(pkt, lambda c: isinstance(c, wire.DataChunk) and c.unordered)

    def read(self, pkt, loc, spec, ctx):
        return pkt.chunks[loc[0]].ssn

    def write(self, pkt, loc, spec, ctx, value):
        return _set_chunk(pkt, loc, ssn=value)


class _Ppid(_Accessor):
    def carriers(self, pkt, spec, ctx):
        return _chunk_locs(pkt, lambda c: isinstance(c, wire.DataChunk))

    def read(self, pkt, loc, spec, ctx):
        return pkt.chunks[loc[0]].ppid

    def write(self, pkt, loc, spec, ctx, value):
        return _set_chunk(pkt, loc, ppid=value)


class _Arwnd(_Accessor):
    def carriers(self, pkt, spec, ctx):
        return _chunk_locs(pkt, lambda c: isinstance(c, wire.SackChunk))

    def read(self, pkt, loc, spec, ctx):
        return pkt.chunks[loc[0]].a_rwnd & ((1 << spec.width_bits) - 1)

    def write(self, pkt, loc, spec, ctx, value):
        mask = (1 << spec.width_bits) - 1
        rwnd = pkt.chunks[loc[0]].a_rwnd
        return _set_chunk(pkt, loc, a_rwnd=(rwnd & ~mask) | value)


def s2_window(sack: wire.SackChunk, ctx: AssocContext | None) -> tuple[int, ...]:
    if ctx is not None and ctx.recent_tsns is not None:
        window = tuple(ctx.recent_tsns[-3:])
        if len(window) < 3:
            raise ConstraintViolation("S2 needs three recently acknowledged TSNs")
        return window
    c = sack.cum_tsn
    return tuple((c - d) & 0xFFFFFFFF for d in (2, 1, 0))


class _DupTsns(_Accessor):
    def carriers(self, pkt, spec, ctx):
        return _chunk_locs(pkt, lambda c: isinstance(c, wire.SackChunk))

    def read(self, pkt, loc, spec, ctx):
        sack = pkt.chunks[loc[0]]
        value = 0
        for tsn in s2_window(sack, ctx):
            value = (value << 1) | (tsn in sack.dup_tsns)
        return value

    def write(self, pkt, loc, spec, ctx, value):
        sack = pkt.chunks[loc[0]]
        window = s2_window(sack, ctx)
        kept = [t for t in sack.dup_tsns if t not in window]
        chosen = [t for i, t in enumerate(window) if value >> (2 - i) & 1]
        return _set_chunk(pkt, loc, dup_tsns=tuple(kept + chosen))

    def check(self, pkt, loc, spec, ctx, value, width):
        if value == 0:
            raise ConstraintViolation("S2 bitmap may not be zero")


def a1_width(ctx: AssocContext | None) -> int:
    if ctx is None or ctx.key_count is None:
        raise ConstraintViolation("A1 needs a configured shared-key count")
    if ctx.key_count < 2:
        raise CapacityZero("A1 needs at least two shared keys")
    return min(ctx.key_count.bit_length() - 1, 4)


class _KeyId(_Accessor):
    def carriers(self, pkt, spec, ctx):
        return _chunk_locs(pkt, lambda c: isinstance(c, wire.AuthChunk))

    def width(self, pkt, loc, spec, ctx):
        return a1_width(ctx)

    def read(self, pkt, loc, spec, ctx):
        return pkt.chunks[loc[0]].key_id & ((1 << a1_width(ctx)) - 1)

    def write(self, pkt, loc, spec, ctx, value):
        mask = (1 << a1_width(ctx)) - 1
        key = pkt.chunks[loc[0]].key_id
        return _set_chunk(pkt, loc, key_id=(key & ~mask) | value)

    def check(self, pkt, loc, spec, ctx, value, width):
        key = (pkt.chunks[loc[0]].key_id & ~((1 << width) - 1)) | value
        if key >= ctx.key_count:
            raise ConstraintViolation(f"key identifier {key} not among {ctx.key_count} keys")


class _BytesField(_Accessor):
    """Base for channels that overwrite an opaque byte string."""

    max_bytes: int | None = None

    def raw(self, pkt, loc) -> bytes:
        raise NotImplementedError

    def store(self, pkt, loc, data: bytes) -> SctpPacket:
        raise NotImplementedError

    def width(self, pkt, loc, spec, ctx):
        n = len(self.raw(pkt, loc))
        if self.max_bytes is not None:
            n = min(n, self.max_bytes)
        return 8 * n

    def read(self, pkt, loc, spec, ctx):
        w = self.width(pkt, loc, spec, ctx)
        return int.from_bytes(self.raw(pkt, loc)[: w // 8], "big")

    def write(self, pkt, loc, spec, ctx, value):
        w = self.width(pkt, loc, spec, ctx)
        old = self.raw(pkt, loc)
        return self.store(pkt, loc, value.to_bytes(w // 8, "big") + old[w // 8:])


class _PadChunkData(_BytesField):
    def carriers(self, pkt, spec, ctx):
        return _chunk_locs(pkt, lambda c: isinstance(c, wire.PadChunk))

    def raw(self, pkt, loc):
        return pkt.chunks[loc[0]].padding

    def store(self, pkt, loc, data):
        return _set_chunk(pkt, loc, padding=data)


class _ParamValue(_BytesField):
    chunk_pred = staticmethod(lambda c: False)
    param_types: frozenset = frozenset()

    def carriers(self, pkt, spec, ctx):
        return _param_locs(pkt, self.chunk_pred, lambda p: p.param_type in self.param_types)

    def raw(self, pkt, loc):
        return _param(pkt, loc).value

    def store(self, pkt, loc, data):
        return _set_param(pkt, loc, replace(_param(pkt, loc), value=data))


def _plausible(addr_bytes: bytes) -> bool:
    ip = ipaddress.ip_address(addr_bytes)
    return not (ip.is_loopback or ip.is_multicast or ip.is_unspecified or ip.is_reserved
                or ip.is_link_local or ip == ipaddress.ip_address("255.255.255.255"))


class _Address(_ParamValue):
    chunk_pred = staticmethod(lambda c: isinstance(c, (wire.InitChunk, wire.AsconfChunk)))
    param_types = frozenset({wire.IPV4_ADDRESS, wire.IPV6_ADDRESS})

    def check(self, pkt, loc, spec, ctx, value, width):
        if spec.plausible and not _plausible(value.to_bytes(width // 8, "big")):
            raise ConstraintViolation("payload would form an implausible address")


class _HeartbeatInfo(_ParamValue):
    chunk_pred = staticmethod(lambda c: isinstance(c, wire.HeartbeatChunk))
    param_types = frozenset({wire.HEARTBEAT_INFO})


class _RandomNumber(_ParamValue):
    chunk_pred = staticmethod(_is_init)
    param_types = frozenset({wire.RANDOM})
    max_bytes = 32


class _PaddingParam(_ParamValue):
    chunk_pred = staticmethod(lambda c: type(c) is wire.InitChunk)
    param_types = frozenset({wire.PADDING})


class _CorrelationId(_Accessor):
    def carriers(self, pkt, spec, ctx):
        return _param_locs(pkt, lambda c: isinstance(c, wire.AsconfChunk),
                           lambda p: p.param_type in wire.ASCONF_REQUESTS)

    def read(self, pkt, loc, spec, ctx):
        return wire.correlation_id(_param(pkt, loc))

    def write(self, pkt, loc, spec, ctx, value):
        return _set_param(pkt, loc, wire.with_correlation_id(_param(pkt, loc), value))


_ACCESSORS: dict[ChannelId, _Accessor] = {
    ChannelId.I1: _InitiateTag(),
    ChannelId.I2: _InboundStreams(),
    ChannelId.D1: _Ssn(),
    ChannelId.D2: _Ppid(),
    ChannelId.S1: _Arwnd(),
    ChannelId.S2: _DupTsns(),
    ChannelId.A1: _KeyId(),
    ChannelId.P1: _PadChunkData(),
    ChannelId.VP1: _Address(),
    ChannelId.VP2: _HeartbeatInfo(),
    ChannelId.VP3: _RandomNumber(),
    ChannelId.VP4: _CorrelationId(),
    ChannelId.VP5: _PaddingParam(),
}

PADDING_DEPENDENT = "padding-length-dependent"

FIELD_SPECS: dict[ChannelId, FieldChannelSpec] = {
    s.channel: s
    for s in (
        FieldChannelSpec(ChannelId.I1, "INIT/INIT_ACK", "initiate_tag", 32, "full field", "value != 0"),
        FieldChannelSpec(ChannelId.I2, "INIT/INIT_ACK", "inbound_streams", 8, "top 8 bits", "field >= 1"),
        FieldChannelSpec(ChannelId.D1, "DATA with U flag", "ssn", 16, "full field"),
        FieldChannelSpec(ChannelId.D2, "DATA", "ppid", 32, "full field"),
        FieldChannelSpec(ChannelId.S1, "SACK", "a_rwnd", 4, "low 4 bits"),
        FieldChannelSpec(ChannelId.S2, "SACK", "dup_tsns", 3, "bitmap over 3 recent TSNs", "bitmap != 0"),
        FieldChannelSpec(ChannelId.A1, "AUTH", "key_id", "floor(log2(key count))", "low k bits",
                         "key id < key count"),
        FieldChannelSpec(ChannelId.P1, "PAD", "padding", PADDING_DEPENDENT, "full field"),
        FieldChannelSpec(ChannelId.VP1, "IPv4/IPv6 Address parameter", "address", 32, "full field"),
        FieldChannelSpec(ChannelId.VP2, "Heartbeat Info parameter", "info", 320, "full field"),
        FieldChannelSpec(ChannelId.VP3, "Random parameter", "random", 256, "first 32 bytes"),
        FieldChannelSpec(ChannelId.VP4, "ASCONF request parameter", "correlation_id", 32, "full field"),
        FieldChannelSpec(ChannelId.VP5, "Padding parameter in INIT", "padding", PADDING_DEPENDENT, "full field"),
    )
}


def spec_for(channel: ChannelId | str, *, s1_bits: int = 4, plausible: bool = False) -> FieldChannelSpec:
    channel = ChannelId(channel)
    if channel not in FIELD_SPECS:
        raise KeyError(f"{channel} is not a field channel")
    spec = FIELD_SPECS[channel]
    if channel is ChannelId.S1:
        if s1_bits not in (3, 4):
            raise ValueError("S1 uses 3 or 4 low bits")
        spec = replace(spec, width_bits=s1_bits, placement=f"low {s1_bits} bits")
    if channel is ChannelId.VP1 and plausible:
        spec = replace(spec, plausible=True)
    return spec


def _as_spec(spec) -> FieldChannelSpec:
    return spec if isinstance(spec, FieldChannelSpec) else spec_for(spec)


def carriers(spec, pkt: SctpPacket, ctx: AssocContext | None = None) -> list[Loc]:
    spec = _as_spec(spec)
    return _ACCESSORS[spec.channel].carriers(pkt, spec, ctx)


def carrier_width(spec, pkt: SctpPacket, ctx: AssocContext | None = None, loc: Loc | None = None) -> int:
    spec = _as_spec(spec)
    acc = _ACCESSORS[spec.channel]
    if loc is None:
        locs = acc.carriers(pkt, spec, ctx)
        if not locs:
            raise CarrierAbsent(f"{spec.channel}: no {spec.carrier} in packet")
        loc = locs[0]
    return acc.width(pkt, loc, spec, ctx)


def _embed_at(spec, acc, pkt, loc, payload, ctx):
    width = acc.width(pkt, loc, spec, ctx)
    if width == 0:
        raise CapacityZero(f"{spec.channel}: carrier has no room")
    bits, used = payload.take(width)
    value = bits.to_int()
    acc.check(pkt, loc, spec, ctx, value, width)
    return acc.write(pkt, loc, spec, ctx, value), used


def embed_field(spec, pkt: SctpPacket, payload, ctx: AssocContext | None = None) -> tuple[SctpPacket, int]:
    """Write the next payload bits into the first carrier of *pkt*.

    Returns the modified packet and the number of payload bits consumed.
    """
    spec = _as_spec(spec)
    payload = BitString(payload)
    if not payload:
        raise ValueError("payload is empty")
    acc = _ACCESSORS[spec.channel]
    locs = acc.carriers(pkt, spec, ctx)
    if not locs:
        raise CarrierAbsent(f"{spec.channel}: no {spec.carrier} in packet")
    return _embed_at(spec, acc, pkt, locs[0], payload, ctx)


def extract_field(spec, pkt: SctpPacket, ctx: AssocContext | None = None) -> BitString:
    spec = _as_spec(spec)
    acc = _ACCESSORS[spec.channel]
    locs = acc.carriers(pkt, spec, ctx)
    if not locs:
        raise CarrierAbsent(f"{spec.channel}: no {spec.carrier} in packet")
    width = acc.width(pkt, locs[0], spec, ctx)
    return BitString.from_int(acc.read(pkt, locs[0], spec, ctx), width)


def embed_all(spec, pkt: SctpPacket, payload, ctx: AssocContext | None = None) -> tuple[SctpPacket, int]:
    """Like :func:`embed_field` but fills every carrier in the packet in order."""
    spec = _as_spec(spec)
    payload = BitString(payload)
    acc = _ACCESSORS[spec.channel]
    locs = acc.carriers(pkt, spec, ctx)
    if not locs:
        raise CarrierAbsent(f"{spec.channel}: no {spec.carrier} in packet")
    total = 0
    for loc in locs:
        if total >= len(payload):
            break
        pkt, used = _embed_at(spec, acc, pkt, loc, payload[total:], ctx)
        total += used
    return pkt, total


def extract_all(spec, pkt: SctpPacket, ctx: AssocContext | None = None) -> BitString:
    spec = _as_spec(spec)
    acc = _ACCESSORS[spec.channel]
    out = BitString()
    for loc in acc.carriers(pkt, spec, ctx):
        out += BitString.from_int(acc.read(pkt, loc, spec, ctx), acc.width(pkt, loc, spec, ctx))
    return out


def embed_packets(spec, packets, payload, ctx: AssocContext | None = None) -> tuple[list[SctpPacket], int]:
    """Spread *payload* over a packet sequence; packets without carriers pass through."""
    spec = _as_spec(spec)
    payload = BitString(payload)
    out, total = [], 0
    for pkt in packets:
        if total < len(payload) and carriers(spec, pkt, ctx):
            pkt, used = embed_all(spec, pkt, payload[total:], ctx)
            total += used
        out.append(pkt)
    return out, total


def extract_packets(spec, packets, ctx: AssocContext | None = None) -> BitString:
    spec = _as_spec(spec)
    out = BitString()
    for pkt in packets:
        out += extract_all(spec, pkt, ctx)
    return out


def registry_width(channel: ChannelId) -> int | tuple[int, int] | str:
    return capacity(channel).bits_per_unit


# -- honest cover packets ---------------------------------------------------

def _ipv4(rng: random.Random) -> bytes:
    return bytes([10, rng.randrange(256), rng.randrange(256), rng.randrange(1, 255)])


def cover_packet(channel: ChannelId | str, rng: random.Random | None = None, *,
                 key_count: int = 16, padding_len: int = 8, heartbeat_len: int = 40,
                 serial: int = 1) -> SctpPacket:
    """Build a standards-conforming packet that contains *channel*'s carrier."""
    channel = ChannelId(channel)
    rng = rng or random.Random(0)
    tag = rng.getrandbits(32) or 1
    hdr = wire.CommonHeader(5000, 5001, tag)
    tsn = rng.getrandbits(31)
    if channel in (ChannelId.I1, ChannelId.I2, ChannelId.VP1, ChannelId.VP3, ChannelId.VP5):
        params = [wire.VarParam(wire.IPV4_ADDRESS, _ipv4(rng))]
        if channel is ChannelId.VP3:
            params.append(wire.VarParam(wire.RANDOM, rng.randbytes(32)))
        if channel is ChannelId.VP5:
            params.append(wire.VarParam(wire.PADDING, bytes(padding_len)))
        init = wire.InitChunk(rng.getrandbits(32) or 1, 65536, 10, 10, tsn, tuple(params))
        return SctpPacket(wire.CommonHeader(5000, 5001, 0), (init,))
    if channel is ChannelId.D1:
        return SctpPacket(hdr, (wire.DataChunk(tsn, 0, 0, 0, rng.randbytes(16), wire.FLAG_U | 3),))
    if channel is ChannelId.D2:
        return SctpPacket(hdr, (wire.DataChunk(tsn, 0, rng.randrange(100), 0, rng.randbytes(16)),))
    if channel in (ChannelId.S1, ChannelId.S2):
        return SctpPacket(hdr, (wire.SackChunk(tsn, 65536),))
    if channel is ChannelId.A1:
        width = min(key_count.bit_length() - 1, 4) if key_count >= 2 else 0
        auth = wire.AuthChunk(rng.randrange(1 << width), 1, rng.randbytes(20))
        return SctpPacket(hdr, (auth, wire.DataChunk(tsn, 0, 0, 0, rng.randbytes(16))))
    if channel is ChannelId.P1:
        return SctpPacket(hdr, (wire.PadChunk(bytes(padding_len)),))
    if channel is ChannelId.VP2:
        info = struct.pack("!Q", rng.getrandbits(64)) + bytes(heartbeat_len - 8)
        return SctpPacket(hdr, (wire.HeartbeatChunk((wire.VarParam(wire.HEARTBEAT_INFO, info),)),))
    if channel is ChannelId.VP4:
        addr = wire.VarParam(wire.IPV4_ADDRESS, _ipv4(rng))
        req = wire.asconf_request(wire.ADD_IP, serial, wire.VarParam(wire.IPV4_ADDRESS, _ipv4(rng)))
        return SctpPacket(hdr, (wire.AsconfChunk(serial, (addr, req)),))
    raise KeyError(f"{channel} is not a field channel")
