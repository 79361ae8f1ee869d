"""Channels in packet structure: chunk count per packet and control-chunk order."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from . import wire
from .bits import BitString
from .errors import (CapacityZero, ConstraintViolation, CountOverflow, InsufficientCarrier,
                     NothingToPermute, Oversize)
from .wire import SctpPacket


@dataclass(frozen=True)
class PackingConfig:
    mtu_data: int = 1400
    chunk_size: int = 200
    honor_constraints: bool = True

    def __post_init__(self):
        if self.chunk_size <= 0 or self.mtu_data // self.chunk_size < 1:
            raise ValueError("mtu_data must hold at least one chunk")

    @property
    def max_chunks(self) -> int:
        return self.mtu_data // self.chunk_size

    @property
    def bits_per_packet(self) -> int:
        return self.max_chunks.bit_length() - 1

    @property
    def theoretical_rate(self) -> float:
        return math.log2(self.max_chunks)


def cc_rate(mtu_data: int, chunk_size: int) -> float:
    """Chunk-count channel capacity in bits per packet, log2(floor(mtu_data / r))."""
    return PackingConfig(mtu_data, chunk_size).theoretical_rate


def _chunk_wire_len(c: wire.Chunk) -> int:
    return c.length + (-c.length % 4)


def cc_embed(cfg: PackingConfig, pending_chunks, payload, filler: bool = False) -> list[list[wire.Chunk]]:
    """Group pending chunks into packets whose sizes spell the payload.

    Each packet holds ``c`` chunks where ``c - 1`` is the next B payload bits.
    With *filler* set, missing chunks are made up with empty PAD chunks.
    """
    payload = BitString(payload)
    if not payload:
        raise ValueError("payload is empty")
    b = cfg.bits_per_packet
    if b == 0:
        raise CapacityZero("one chunk per packet leaves no room to encode bits")
    queue = deque(pending_chunks)
    plan = []
    for i in range(0, len(payload), b):
        bits, _ = payload[i:].take(b)
        count = bits.to_int() + 1
        if len(queue) < count and not filler:
            raise InsufficientCarrier(f"need {count} chunks, {len(queue)} pending")
        packet = [queue.popleft() if queue else wire.PadChunk() for _ in range(count)]
        if sum(_chunk_wire_len(c) for c in packet) > cfg.mtu_data:
            raise Oversize("planned packet exceeds mtu_data")
        plan.append(packet)
    return plan


def cc_packets(plan, header: wire.CommonHeader) -> list[SctpPacket]:
    return [SctpPacket(header, tuple(chunks)) for chunks in plan]


def cc_extract(cfg: PackingConfig, packets) -> BitString:
    b = cfg.bits_per_packet
    out = []
    for pkt in packets:
        count = len(pkt.chunks)
        if count > cfg.max_chunks:
            raise CountOverflow(f"{count} chunks exceed the maximum of {cfg.max_chunks}")
        out.append(format(count - 1, f"0{b}b"))
    return BitString("".join(out))


# -- chunk order ---------------------------------------------------------------

def rank_permutation(perm) -> int:
    """Lexicographic (Lehmer) rank of a permutation of 0..m-1."""
    perm = list(perm)
    m = len(perm)
    rank = 0
    for i, p in enumerate(perm):
        smaller = sum(1 for q in perm[i + 1:] if q < p)
        rank += smaller * math.factorial(m - 1 - i)
    return rank


def unrank_permutation(rank: int, m: int) -> list[int]:
    items = list(range(m))
    out = []
    for i in range(m, 0, -1):
        f = math.factorial(i - 1)
        idx, rank = divmod(rank, f)
        out.append(items.pop(idx))
    return out


def co_bits(m: int) -> int:
    return math.factorial(m).bit_length() - 1 if m >= 2 else 0


def canonical_key(c: wire.Chunk):
    return (c.chunk_type, c.encode())


def _split(pkt: SctpPacket, honor: bool):
    if honor:
        movable = [c for c in pkt.chunks if c.is_control]
        fixed = [c for c in pkt.chunks if not c.is_control]
    else:
        movable, fixed = list(pkt.chunks), []
    if len(movable) < 2:
        raise NothingToPermute(f"{len(movable)} reorderable chunk(s)")
    return movable, fixed


def co_embed(pkt: SctpPacket, payload, honor_constraints: bool = True) -> tuple[SctpPacket, int]:
    """Permute the reorderable chunks so their rank spells the next payload bits."""
    payload = BitString(payload)
    movable, fixed = _split(pkt, honor_constraints)
    canon = sorted(movable, key=canonical_key)
    keys = [canonical_key(c) for c in canon]
    if len(set(keys)) != len(keys):
        raise ConstraintViolation("identical chunks make the order ambiguous")
    width = co_bits(len(canon))
    bits, used = payload.take(width)
    order = [canon[i] for i in unrank_permutation(bits.to_int(), len(canon))]
    if honor_constraints:
        order += sorted(fixed, key=lambda c: c.tsn)
    return pkt.with_chunks(order), used


def co_extract(pkt: SctpPacket, honor_constraints: bool = True) -> BitString:
    movable, _ = _split(pkt, honor_constraints)
    keys = [canonical_key(c) for c in movable]
    canon = sorted(keys)
    perm = [canon.index(k) for k in keys]
    return BitString.from_int(rank_permutation(perm), co_bits(len(movable)))
