"""Message framing over channels that carry bits without a natural end.

A frame is a 32-bit payload length followed by the payload.  Channels with a
forbidden all-zero code point (I1, S2) carry the frame as base ``2**w - 1``
digits shifted up by one, so no symbol is ever zero.
"""

from __future__ import annotations

import random

from . import fields
from .bits import BitString
from .core import ChannelId
from .errors import LengthOverrun

LENGTH_BITS = 32
ZERO_HAZARD = {ChannelId.I1: 32, ChannelId.S2: 3}


def frame(payload) -> BitString:
    payload = BitString(payload)
    if len(payload) >> LENGTH_BITS:
        raise ValueError("payload too long for the length field")
    return BitString.from_int(len(payload), LENGTH_BITS) + payload


def unframe(bits) -> BitString:
    bits = BitString(bits)
    if len(bits) < LENGTH_BITS:
        raise LengthOverrun("fewer bits than the length field")
    length = bits[:LENGTH_BITS].to_int()
    if LENGTH_BITS + length > len(bits):
        raise LengthOverrun(f"frame declares {length} bits, {len(bits) - LENGTH_BITS} present")
    return bits[LENGTH_BITS:LENGTH_BITS + length]


def nonzero_symbols(bits, width: int) -> list[int]:
    """Digits 1 .. 2**width - 1 encoding *bits* (a leading 1 keeps leading zeros)."""
    value = int("1" + BitString(bits), 2)
    base = (1 << width) - 1
    out = []
    while value:
        value, d = divmod(value, base)
        out.append(d + 1)
    return out[::-1]


def nonzero_bits(symbols, width: int) -> BitString:
    base = (1 << width) - 1
    value = 0
    for s in symbols:
        if not 1 <= s <= base:
            raise ValueError(f"symbol {s} out of range")
        value = value * base + (s - 1)
    text = bin(value)[3:] if value else ""
    return BitString(text)


def _symbol_bits(bits, channel: ChannelId) -> BitString:
    w = ZERO_HAZARD.get(channel)
    if w is None:
        return BitString(bits)
    return BitString("".join(format(s, f"0{w}b") for s in nonzero_symbols(bits, w)))


def _symbols_payload(bits, channel: ChannelId) -> BitString:
    w = ZERO_HAZARD.get(channel)
    if w is None:
        return BitString(bits)
    usable = len(bits) - len(bits) % w
    return nonzero_bits([int(bits[i:i + w], 2) for i in range(0, usable, w)], w)


def craft_field(channel, payload, rng: random.Random | None = None, ctx: fields.AssocContext | None = None,
                padding_len: int = 8, key_count: int = 16, s1_bits: int = 4) -> list:
    """Cover packets carrying a framed *payload* on a field channel, as few as needed."""
    channel = ChannelId(channel)
    rng = rng or random.Random(0)
    spec = fields.spec_for(channel, s1_bits=s1_bits)
    if channel is ChannelId.A1 and ctx is None:
        ctx = fields.AssocContext(key_count=key_count)
    bits = _symbol_bits(frame(payload), channel)
    packets, pos = [], 0
    while pos < len(bits):
        pkt = fields.cover_packet(channel, rng, key_count=key_count, padding_len=padding_len,
                                  serial=len(packets) + 1)
        pkt, used = fields.embed_all(spec, pkt, bits[pos:], ctx)
        pos += used
        packets.append(pkt)
    return packets


def extract_framed(channel, packets, ctx: fields.AssocContext | None = None, key_count: int = 16,
                   s1_bits: int = 4) -> BitString:
    channel = ChannelId(channel)
    spec = fields.spec_for(channel, s1_bits=s1_bits)
    if channel is ChannelId.A1 and ctx is None:
        ctx = fields.AssocContext(key_count=key_count)
    bits = BitString()
    for pkt in packets:
        if fields.carriers(spec, pkt, ctx):
            bits += fields.extract_all(spec, pkt, ctx)
    return unframe(_symbols_payload(bits, channel))
