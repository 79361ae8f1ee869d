"""Bit-exact SCTP packet codec (RFC 4960 TLV layout, big-endian).

Chunk types used by the covert channels get structured dataclasses; every
other chunk or parameter type is kept as an opaque record so nonstandard
traffic survives a decode/encode cycle.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import ClassVar

from .crc32c import crc32c
from .errors import BadChecksum, BadLengthField, BodyMismatch, Oversize, Truncated

# chunk types
DATA = 0
INIT = 1
INIT_ACK = 2
SACK = 3
HEARTBEAT = 4
ABORT = 6
SHUTDOWN = 7
ERROR = 9
COOKIE_ECHO = 10
COOKIE_ACK = 11
AUTH = 15
PAD = 132
FORWARD_TSN = 192
ASCONF = 193

# parameter types
HEARTBEAT_INFO = 1
IPV4_ADDRESS = 5
IPV6_ADDRESS = 6
STATE_COOKIE = 7
RANDOM = 32770
PADDING = 32773
ADD_IP = 49153
DELETE_IP = 49154
SET_PRIMARY = 49156
ASCONF_REQUESTS = frozenset({ADD_IP, DELETE_IP, SET_PRIMARY})

# DATA flags
FLAG_E = 0x01
FLAG_B = 0x02
FLAG_U = 0x04

HEADER_LEN = 12
DEFAULT_MAX_PACKET = 1500 - 20

CHUNK_NAMES = {
    DATA: "DATA", INIT: "INIT", INIT_ACK: "INIT_ACK", SACK: "SACK",
    HEARTBEAT: "HEARTBEAT", ABORT: "ABORT", SHUTDOWN: "SHUTDOWN", ERROR: "ERROR",
    COOKIE_ECHO: "COOKIE_ECHO", COOKIE_ACK: "COOKIE_ACK", AUTH: "AUTH", PAD: "PAD",
    FORWARD_TSN: "FORWARD_TSN", ASCONF: "ASCONF",
}

_U8, _U16, _U32 = 0xFF, 0xFFFF, 0xFFFFFFFF


def _pad4(n: int) -> int:
    return -n % 4


def _check(name: str, value: int, limit: int) -> None:
    if not isinstance(value, int) or not 0 <= value <= limit:
        raise BodyMismatch(f"{name}={value!r} out of range")


@dataclass(frozen=True)
class CommonHeader:
    src_port: int = 5000
    dst_port: int = 5000
    verification_tag: int = 0
    checksum: int = field(default=0, compare=False)


@dataclass(frozen=True)
class VarParam:
    param_type: int
    value: bytes = b""

    @property
    def length(self) -> int:
        return 4 + len(self.value)

    def validate(self) -> None:
        _check("param_type", self.param_type, _U16)
        if self.param_type == IPV4_ADDRESS and len(self.value) != 4:
            raise BodyMismatch("IPv4 Address parameter value must be 4 bytes")
        if self.param_type == IPV6_ADDRESS and len(self.value) != 16:
            raise BodyMismatch("IPv6 Address parameter value must be 16 bytes")
        if self.param_type in ASCONF_REQUESTS and len(self.value) < 4:
            raise BodyMismatch("ASCONF request parameter lacks a correlation ID")
        if self.length > _U16:
            raise BodyMismatch("parameter too long")

    def encode(self) -> bytes:
        self.validate()
        return struct.pack("!HH", self.param_type, self.length) + self.value


def asconf_request(param_type: int, correlation_id: int, address: VarParam) -> VarParam:
    """Build an Add IP / Delete IP / Set Primary request parameter."""
    return VarParam(param_type, struct.pack("!I", correlation_id) + address.encode())


def correlation_id(param: VarParam) -> int:
    return struct.unpack_from("!I", param.value)[0]


def with_correlation_id(param: VarParam, cid: int) -> VarParam:
    return replace(param, value=struct.pack("!I", cid) + param.value[4:])


def encode_params(params) -> bytes:
    out = b""
    for p in params:
        raw = p.encode()
        out += raw + b"\0" * _pad4(len(raw))
    if params:
        # the last parameter's padding is chunk padding, not counted in the length
        out = out[: len(out) - _pad4(params[-1].length)]
    return out


def decode_params(data: bytes) -> tuple[VarParam, ...]:
    params = []
    off = 0
    while off < len(data):
        if len(data) - off < 4:
            raise BadLengthField("trailing bytes shorter than a parameter header")
        ptype, plen = struct.unpack_from("!HH", data, off)
        if plen < 4 or off + plen > len(data):
            raise BadLengthField(f"parameter length {plen} invalid at offset {off}")
        p = VarParam(ptype, bytes(data[off + 4: off + plen]))
        try:
            p.validate()
        except BodyMismatch as exc:
            raise BadLengthField(str(exc)) from None
        params.append(p)
        off += plen + _pad4(plen)
    return tuple(params)


class Chunk:
    """Base for chunk records; subclasses are frozen dataclasses."""

    chunk_type: int
    flags: int

    def value_bytes(self) -> bytes:
        raise NotImplementedError

    @property
    def length(self) -> int:
        return 4 + len(self.value_bytes())

    @property
    def is_control(self) -> bool:
        return self.chunk_type != DATA

    @property
    def name(self) -> str:
        return CHUNK_NAMES.get(self.chunk_type, f"TYPE{self.chunk_type}")

    def encode(self) -> bytes:
        _check("flags", self.flags, _U8)
        value = self.value_bytes()
        length = 4 + len(value)
        if length > _U16:
            raise BodyMismatch("chunk too long")
        return struct.pack("!BBH", self.chunk_type, self.flags, length) + value + b"\0" * _pad4(length)


_REGISTRY: dict[int, type] = {}


def _register(cls):
    _REGISTRY[cls.CHUNK_TYPE] = cls
    return cls


@_register
@dataclass(frozen=True)
class DataChunk(Chunk):
    CHUNK_TYPE: ClassVar[int] = DATA
    tsn: int
    stream: int
    ssn: int
    ppid: int = 0
    data: bytes = b""
    flags: int = FLAG_B | FLAG_E

    @property
    def chunk_type(self) -> int:
        return DATA

    @property
    def unordered(self) -> bool:
        return bool(self.flags & FLAG_U)

    @property
    def beginning(self) -> bool:
        return bool(self.flags & FLAG_B)

    @property
    def ending(self) -> bool:
        return bool(self.flags & FLAG_E)

    def value_bytes(self) -> bytes:
        _check("tsn", self.tsn, _U32)
        _check("stream", self.stream, _U16)
        _check("ssn", self.ssn, _U16)
        _check("ppid", self.ppid, _U32)
        return struct.pack("!IHHI", self.tsn, self.stream, self.ssn, self.ppid) + self.data

    @classmethod
    def from_value(cls, flags: int, value: bytes) -> "DataChunk":
        if len(value) < 12:
            raise BadLengthField("DATA chunk shorter than 16 bytes")
        tsn, si, ssn, ppid = struct.unpack_from("!IHHI", value)
        return cls(tsn, si, ssn, ppid, bytes(value[12:]), flags)


@_register
@dataclass(frozen=True)
class InitChunk(Chunk):
    CHUNK_TYPE: ClassVar[int] = INIT
    initiate_tag: int
    a_rwnd: int = 65536
    outbound_streams: int = 1
    inbound_streams: int = 1
    initial_tsn: int = 0
    params: tuple[VarParam, ...] = ()
    flags: int = 0

    @property
    def chunk_type(self) -> int:
        return self.CHUNK_TYPE

    def value_bytes(self) -> bytes:
        _check("initiate_tag", self.initiate_tag, _U32)
        _check("a_rwnd", self.a_rwnd, _U32)
        _check("outbound_streams", self.outbound_streams, _U16)
        _check("inbound_streams", self.inbound_streams, _U16)
        _check("initial_tsn", self.initial_tsn, _U32)
        head = struct.pack("!IIHHI", self.initiate_tag, self.a_rwnd, self.outbound_streams,
                           self.inbound_streams, self.initial_tsn)
        return head + encode_params(self.params)

    @classmethod
    def from_value(cls, flags: int, value: bytes):
        if len(value) < 16:
            raise BadLengthField("INIT chunk shorter than 20 bytes")
        tag, rwnd, out_s, in_s, itsn = struct.unpack_from("!IIHHI", value)
        return cls(tag, rwnd, out_s, in_s, itsn, decode_params(value[16:]), flags)


@_register
@dataclass(frozen=True)
class InitAckChunk(InitChunk):
    CHUNK_TYPE: ClassVar[int] = INIT_ACK


@_register
@dataclass(frozen=True)
class SackChunk(Chunk):
    CHUNK_TYPE: ClassVar[int] = SACK
    cum_tsn: int
    a_rwnd: int = 65536
    gap_blocks: tuple[tuple[int, int], ...] = ()
    dup_tsns: tuple[int, ...] = ()
    flags: int = 0

    @property
    def chunk_type(self) -> int:
        return SACK

    def value_bytes(self) -> bytes:
        _check("cum_tsn", self.cum_tsn, _U32)
        _check("a_rwnd", self.a_rwnd, _U32)
        out = struct.pack("!IIHH", self.cum_tsn, self.a_rwnd, len(self.gap_blocks), len(self.dup_tsns))
        for start, end in self.gap_blocks:
            _check("gap start", start, _U16)
            _check("gap end", end, _U16)
            out += struct.pack("!HH", start, end)
        for t in self.dup_tsns:
            _check("dup tsn", t, _U32)
            out += struct.pack("!I", t)
        return out

    @classmethod
    def from_value(cls, flags: int, value: bytes) -> "SackChunk":
        if len(value) < 12:
            raise BadLengthField("SACK chunk shorter than 16 bytes")
        cum, rwnd, ngap, ndup = struct.unpack_from("!IIHH", value)
        if len(value) != 12 + 4 * ngap + 4 * ndup:
            raise BadLengthField("SACK length disagrees with block counts")
        gaps = tuple(struct.unpack_from("!HH", value, 12 + 4 * i) for i in range(ngap))
        base = 12 + 4 * ngap
        dups = tuple(struct.unpack_from("!I", value, base + 4 * i)[0] for i in range(ndup))
        return cls(cum, rwnd, gaps, dups, flags)


@_register
@dataclass(frozen=True)
class HeartbeatChunk(Chunk):
    CHUNK_TYPE: ClassVar[int] = HEARTBEAT
    params: tuple[VarParam, ...] = ()
    flags: int = 0

    @property
    def chunk_type(self) -> int:
        return HEARTBEAT

    def value_bytes(self) -> bytes:
        return encode_params(self.params)

    @classmethod
    def from_value(cls, flags: int, value: bytes) -> "HeartbeatChunk":
        return cls(decode_params(value), flags)


@_register
@dataclass(frozen=True)
class CookieEchoChunk(Chunk):
    CHUNK_TYPE: ClassVar[int] = COOKIE_ECHO
    cookie: bytes = b""
    flags: int = 0

    @property
    def chunk_type(self) -> int:
        return COOKIE_ECHO

    def value_bytes(self) -> bytes:
        return self.cookie

    @classmethod
    def from_value(cls, flags: int, value: bytes) -> "CookieEchoChunk":
        return cls(bytes(value), flags)


@_register
@dataclass(frozen=True)
class CookieAckChunk(Chunk):
    CHUNK_TYPE: ClassVar[int] = COOKIE_ACK
    flags: int = 0

    @property
    def chunk_type(self) -> int:
        return COOKIE_ACK

    def value_bytes(self) -> bytes:
        return b""

    @classmethod
    def from_value(cls, flags: int, value: bytes) -> "CookieAckChunk":
        if value:
            raise BadLengthField("COOKIE ACK carries no value")
        return cls(flags)


@_register
@dataclass(frozen=True)
class AuthChunk(Chunk):
    CHUNK_TYPE: ClassVar[int] = AUTH
    key_id: int
    hmac_id: int = 1
    hmac: bytes = b""
    flags: int = 0

    @property
    def chunk_type(self) -> int:
        return AUTH

    def value_bytes(self) -> bytes:
        _check("key_id", self.key_id, _U16)
        _check("hmac_id", self.hmac_id, _U16)
        return struct.pack("!HH", self.key_id, self.hmac_id) + self.hmac

    @classmethod
    def from_value(cls, flags: int, value: bytes) -> "AuthChunk":
        if len(value) < 4:
            raise BadLengthField("AUTH chunk shorter than 8 bytes")
        key_id, hmac_id = struct.unpack_from("!HH", value)
        return cls(key_id, hmac_id, bytes(value[4:]), flags)


@_register
@dataclass(frozen=True)
class PadChunk(Chunk):
    CHUNK_TYPE: ClassVar[int] = PAD
    padding: bytes = b""
    flags: int = 0

    @property
    def chunk_type(self) -> int:
        return PAD

    def value_bytes(self) -> bytes:
        return self.padding

    @classmethod
    def from_value(cls, flags: int, value: bytes) -> "PadChunk":
        return cls(bytes(value), flags)


@_register
@dataclass(frozen=True)
class ForwardTsnChunk(Chunk):
    CHUNK_TYPE: ClassVar[int] = FORWARD_TSN
    new_cum_tsn: int
    streams: tuple[tuple[int, int], ...] = ()
    flags: int = 0

    @property
    def chunk_type(self) -> int:
        return FORWARD_TSN

    def value_bytes(self) -> bytes:
        _check("new_cum_tsn", self.new_cum_tsn, _U32)
        out = struct.pack("!I", self.new_cum_tsn)
        for si, ssn in self.streams:
            _check("stream", si, _U16)
            _check("ssn", ssn, _U16)
            out += struct.pack("!HH", si, ssn)
        return out

    @classmethod
    def from_value(cls, flags: int, value: bytes) -> "ForwardTsnChunk":
        if len(value) < 4 or len(value) % 4:
            raise BadLengthField("FORWARD TSN length must be 8 + 4n")
        (cum,) = struct.unpack_from("!I", value)
        pairs = tuple(struct.unpack_from("!HH", value, off) for off in range(4, len(value), 4))
        return cls(cum, pairs, flags)


@_register
@dataclass(frozen=True)
class AsconfChunk(Chunk):
    """ASCONF: serial number, the sender's address parameter, then request parameters."""

    CHUNK_TYPE: ClassVar[int] = ASCONF
    serial: int
    params: tuple[VarParam, ...] = ()
    flags: int = 0

    @property
    def chunk_type(self) -> int:
        return ASCONF

    def value_bytes(self) -> bytes:
        _check("serial", self.serial, _U32)
        return struct.pack("!I", self.serial) + encode_params(self.params)

    @classmethod
    def from_value(cls, flags: int, value: bytes) -> "AsconfChunk":
        if len(value) < 4:
            raise BadLengthField("ASCONF chunk shorter than 8 bytes")
        (serial,) = struct.unpack_from("!I", value)
        return cls(serial, decode_params(value[4:]), flags)

    @property
    def requests(self) -> tuple[VarParam, ...]:
        return tuple(p for p in self.params if p.param_type in ASCONF_REQUESTS)


@dataclass(frozen=True)
class RawChunk(Chunk):
    """Any chunk type without a structured body, kept verbatim."""

    chunk_type: int
    flags: int = 0
    value: bytes = b""

    def value_bytes(self) -> bytes:
        _check("chunk_type", self.chunk_type, _U8)
        if self.chunk_type in _REGISTRY:
            raise BodyMismatch(f"type {self.chunk_type} has a structured body; use its class")
        return self.value


@dataclass(frozen=True)
class SctpPacket:
    header: CommonHeader
    chunks: tuple[Chunk, ...]

    def __post_init__(self):
        if not isinstance(self.chunks, tuple):
            object.__setattr__(self, "chunks", tuple(self.chunks))

    def data_chunks(self) -> list[DataChunk]:
        return [c for c in self.chunks if isinstance(c, DataChunk)]

    def with_chunks(self, chunks) -> "SctpPacket":
        return replace(self, chunks=tuple(chunks))

    def replace_chunk(self, index: int, chunk: Chunk) -> "SctpPacket":
        chunks = list(self.chunks)
        chunks[index] = chunk
        return self.with_chunks(chunks)


def is_well_ordered(pkt: SctpPacket) -> bool:
    """Control chunks precede DATA chunks and DATA TSNs strictly increase."""
    seen_data = False
    last_tsn = None
    for c in pkt.chunks:
        if c.chunk_type == DATA:
            seen_data = True
            if last_tsn is not None and c.tsn <= last_tsn:
                return False
            last_tsn = c.tsn
        elif seen_data:
            return False
    return True


def encode_packet(pkt: SctpPacket, max_size: int | None = None) -> bytes:
    """Serialize *pkt*, writing the CRC32c into the header.

    Lengths are recomputed from content.  When *max_size* is given the packet
    must fit, otherwise :class:`Oversize` is raised.
    """
    if not pkt.chunks:
        raise BodyMismatch("a packet needs at least one chunk")
    h = pkt.header
    _check("src_port", h.src_port, _U16)
    _check("dst_port", h.dst_port, _U16)
    _check("verification_tag", h.verification_tag, _U32)
    body = b"".join(c.encode() for c in pkt.chunks)
    raw = bytearray(struct.pack("!HHII", h.src_port, h.dst_port, h.verification_tag, 0) + body)
    if max_size is not None and len(raw) > max_size:
        raise Oversize(f"packet of {len(raw)} bytes exceeds {max_size}")
    struct.pack_into("!I", raw, 8, crc32c(bytes(raw)))
    return bytes(raw)


def packet_checksum(data: bytes) -> int:
    """CRC32c of serialized packet bytes with the checksum field zeroed."""
    return crc32c(bytes(data[:8]) + b"\0\0\0\0" + bytes(data[12:]))


def decode_chunk(ctype: int, flags: int, value: bytes) -> Chunk:
    cls = _REGISTRY.get(ctype)
    if cls is None:
        return RawChunk(ctype, flags, bytes(value))
    return cls.from_value(flags, value)


def decode_packet(data: bytes, verify_crc: bool = True) -> SctpPacket:
    if len(data) < HEADER_LEN + 4:
        raise Truncated(f"{len(data)} bytes is below the 16-byte minimum")
    sport, dport, vtag, checksum = struct.unpack_from("!HHII", data)
    if verify_crc and packet_checksum(data) != checksum:
        raise BadChecksum(f"checksum 0x{checksum:08x} does not match contents")
    chunks = []
    off = HEADER_LEN
    while off < len(data):
        if len(data) - off < 4:
            raise Truncated("trailing bytes shorter than a chunk header")
        ctype, flags, clen = struct.unpack_from("!BBH", data, off)
        if clen < 4:
            raise BadLengthField(f"chunk length {clen} below 4 at offset {off}")
        if off + clen > len(data):
            raise BadLengthField(f"chunk length {clen} overruns packet at offset {off}")
        chunks.append(decode_chunk(ctype, flags, data[off + 4: off + clen]))
        off += clen + _pad4(clen)
    return SctpPacket(CommonHeader(sport, dport, vtag, checksum), tuple(chunks))


def wire_size(pkt: SctpPacket) -> int:
    return HEADER_LEN + sum(c.length + _pad4(c.length) for c in pkt.chunks)
