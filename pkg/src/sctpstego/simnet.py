"""Deterministic discrete-event simulator of one two-endpoint SCTP association.

Endpoint A (the sender) carries application data to endpoint B (the
receiver).  Time is an integer tick counter; every packet takes
``cfg.delay`` ticks to cross the network and losses are drawn i.i.d. per
packet from a generator seeded by ``cfg.seed``.  The same configuration and
script always produce the same event log.

Channels plug into the endpoints through a few hooks:

* ``Sender.retransmit_path`` / ``Sender.self_drop`` (multi-homing channel)
* ``Receiver.sack_path`` / ``Receiver.sack_transform`` (reverse direction)
* covert message flags on :meth:`Association.send_message` (hybrid channels)
"""

from __future__ import annotations

import heapq
import ipaddress
import json
import random
import struct
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable

from . import wire
from .errors import BadStream, HandshakeFailed, NotEstablished
from .wire import SctpPacket

CLOSED = "CLOSED"
COOKIE_WAIT = "COOKIE_WAIT"
COOKIE_ECHOED = "COOKIE_ECHOED"
ESTABLISHED = "ESTABLISHED"

SEND = "SEND"
DELIVER = "DELIVER"
LOSE = "LOSE"
RETRANSMIT = "RETRANSMIT"
SACK = "SACK"
FORWARD_TSN = "FORWARD_TSN"
APP_DELIVERY = "APP_DELIVERY"

HEARTBEAT_ACK = 5


def as_address(a):
    return a if isinstance(a, (ipaddress.IPv4Address, ipaddress.IPv6Address)) else ipaddress.ip_address(a)


def address_param(addr) -> wire.VarParam:
    ptype = wire.IPV4_ADDRESS if addr.version == 4 else wire.IPV6_ADDRESS
    return wire.VarParam(ptype, addr.packed)


@dataclass
class AssocConfig:
    stream_count: int = 4
    sender_addrs: tuple = ("10.0.0.1",)
    receiver_addrs: tuple = ("10.0.1.1",)
    mtu: int = 1500
    fragmentation_threshold: int = 1400
    loss: float | dict = 0.0
    ack_loss: bool = False
    handshake_loss: bool = False
    seed: int = 0
    rto: int = 4
    delay: int = 1
    partial_reliability: bool = False
    delayed_sack: bool = False
    chunks_per_packet: int = 1
    send_interval: int = 1
    a_rwnd: int = 65536
    src_port: int = 5000
    dst_port: int = 5001
    ppid: int = 0
    heartbeat_interval: int = 0
    max_init_retries: int = 4
    drop_first: frozenset = frozenset()  # data chunk offsets (TSN - initial TSN) whose first send is lost

    def __post_init__(self):
        self.sender_addrs = tuple(as_address(a) for a in self.sender_addrs)
        self.receiver_addrs = tuple(as_address(a) for a in self.receiver_addrs)
        self.drop_first = frozenset(self.drop_first)
        if self.stream_count < 1:
            raise ValueError("stream_count must be >= 1")
        if not self.sender_addrs or not self.receiver_addrs:
            raise ValueError("each endpoint needs at least one address")
        probs = self.loss.values() if isinstance(self.loss, dict) else [self.loss]
        if any(not 0 <= p < 1 for p in probs):
            raise ValueError("loss probabilities must lie in [0, 1)")

    @property
    def primary_path(self):
        return self.sender_addrs[0], self.receiver_addrs[0]

    @property
    def alternate_path(self):
        s, r = self.sender_addrs, self.receiver_addrs
        return s[1 % len(s)], r[1 % len(r)]

    def loss_for(self, path) -> float:
        if isinstance(self.loss, dict):
            key = (str(path[0]), str(path[1]))
            return self.loss.get(key, self.loss.get(path, 0.0))
        return self.loss


@dataclass(frozen=True)
class DeliveredMessage:
    stream: int
    ssn: int
    ordered: bool
    data: bytes


@dataclass
class SimEvent:
    tick: int
    seq: int
    kind: str
    endpoint: str
    packet: SctpPacket | None = None
    path: tuple | None = None
    message: DeliveredMessage | None = None

    def raw(self) -> bytes:
        return wire.encode_packet(self.packet) if self.packet is not None else b""

    def to_json(self) -> str:
        d = {"tick": self.tick, "seq": self.seq, "kind": self.kind, "endpoint": self.endpoint,
             "path": [str(a) for a in self.path] if self.path else None,
             "packet": self.raw().hex() if self.packet is not None else None}
        if self.message is not None:
            m = self.message
            d["message"] = {"stream": m.stream, "ssn": m.ssn, "ordered": m.ordered, "data": m.data.hex()}
        return json.dumps(d, sort_keys=True)


# -- sender -------------------------------------------------------------------

@dataclass(eq=False)
class OutMessage:
    mid: int
    stream: int
    data: bytes
    ordered: bool
    ssn: int
    max_retrans: int | None = None
    covert: str | None = None  # None, "hy1" or "hy2"
    covert_data: bytes = b""
    chunks: list = field(default_factory=list)


@dataclass(eq=False)
class TxChunk:
    msg: OutMessage
    data: bytes
    flags: int
    tsn: int | None = None
    first_sent: int | None = None
    last_sent: int | None = None
    retrans: int = 0
    gap_acked: bool = False
    abandoned: bool = False
    withheld: bool = False
    path: tuple | None = None

    def to_chunk(self, ppid: int) -> wire.DataChunk:
        ssn = self.msg.ssn if self.msg.ordered else 0
        return wire.DataChunk(self.tsn, self.msg.stream, ssn, ppid, self.data, self.flags)


@dataclass(eq=False)
class CovertLate:
    """HY1 state for one withheld chunk."""

    tsn: int
    chunk: TxChunk
    state: str = "skipped"  # skipped -> ready -> sent -> done
    last_sent: int | None = None


class Sender:
    def __init__(self, cfg: AssocConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.phase = CLOSED
        self.my_tag = rng.getrandbits(32) or 1
        self.peer_tag = 0
        self.initial_tsn = rng.randrange(1, 1 << 24)
        self.next_tsn = self.initial_tsn
        self.cum_ack = self.initial_tsn - 1
        self.apap = self.cum_ack
        self.pending: deque[TxChunk] = deque()
        self.sent: dict[int, TxChunk] = {}
        self.ssn_next = defaultdict(int)
        self.messages: list[OutMessage] = []
        self.cookie = b""
        self.hs_last = None
        self.hs_tries = 0
        self.ft_sent_at = None
        self.ft_value = None
        self.next_data_tick = 0
        self.hy1: dict[int, CovertLate] = {}
        self.retransmit_path: Callable[[TxChunk], tuple] = lambda ch: cfg.alternate_path
        self.self_drop: Callable[[TxChunk], bool] = lambda ch: False

    # handshake --------------------------------------------------------------
    def header(self, init: bool = False) -> wire.CommonHeader:
        return wire.CommonHeader(self.cfg.src_port, self.cfg.dst_port, 0 if init else self.peer_tag)

    def init_packet(self) -> SctpPacket:
        params = tuple(address_param(a) for a in self.cfg.sender_addrs) if len(self.cfg.sender_addrs) > 1 else ()
        chunk = wire.InitChunk(self.my_tag, self.cfg.a_rwnd, self.cfg.stream_count, self.cfg.stream_count,
                               self.initial_tsn, params)
        return SctpPacket(self.header(init=True), (chunk,))

    def start(self, now: int):
        self.phase = COOKIE_WAIT
        self.hs_last = now
        self.hs_tries = 1
        return [(self.init_packet(), self.cfg.primary_path, SEND)]

    # message intake ---------------------------------------------------------
    def enqueue(self, stream: int, data: bytes, ordered: bool, max_retrans=None, covert=None,
                covert_data=b"") -> OutMessage:
        ssn = 0
        if ordered:
            ssn = self.ssn_next[stream]
            self.ssn_next[stream] = (ssn + 1) & 0xFFFF
        msg = OutMessage(len(self.messages), stream, data, ordered, ssn, max_retrans, covert, covert_data)
        thr = self.cfg.fragmentation_threshold
        pieces = [data[i:i + thr] for i in range(0, len(data), thr)] or [b""]
        for i, piece in enumerate(pieces):
            flags = (wire.FLAG_B if i == 0 else 0) | (wire.FLAG_E if i == len(pieces) - 1 else 0)
            if not ordered:
                flags |= wire.FLAG_U
            ch = TxChunk(msg, piece, flags)
            msg.chunks.append(ch)
            self.pending.append(ch)
        if covert == "hy2":
            last = msg.chunks[-1]
            last.data = covert_data
        self.messages.append(msg)
        return msg

    def idle(self) -> bool:
        busy_hy1 = any(s.state != "done" for s in self.hy1.values())
        live = any(not (c.abandoned or c.withheld) for c in self.sent.values())
        return not self.pending and not live and not busy_hy1 and self.apap <= self.cum_ack

    # incoming ---------------------------------------------------------------
    def on_packet(self, pkt: SctpPacket, path, now: int) -> list:
        out = []
        for c in pkt.chunks:
            if isinstance(c, wire.InitAckChunk) and self.phase == COOKIE_WAIT:
                self.peer_tag = c.initiate_tag
                cookie = next((p.value for p in c.params if p.param_type == wire.STATE_COOKIE), b"")
                self.cookie = cookie
                self.phase = COOKIE_ECHOED
                self.hs_last = now
                self.hs_tries = 1
                out.append((SctpPacket(self.header(), (wire.CookieEchoChunk(cookie),)), self.cfg.primary_path, SEND))
            elif isinstance(c, wire.CookieAckChunk) and self.phase == COOKIE_ECHOED:
                self.phase = ESTABLISHED
                self.next_data_tick = now + 1
            elif isinstance(c, wire.SackChunk):
                self.on_sack(c)
        return out

    def on_sack(self, sack: wire.SackChunk) -> None:
        cum = sack.cum_tsn
        if cum > self.cum_ack:
            for t in range(self.cum_ack + 1, cum + 1):
                self.sent.pop(t, None)
            self.cum_ack = cum
            self.apap = max(self.apap, cum)
        for start, end in sack.gap_blocks:
            for t in range(cum + start, cum + end + 1):
                if t in self.sent:
                    self.sent[t].gap_acked = True
        for late in self.hy1.values():
            if late.state == "skipped" and cum >= late.tsn:
                late.state = "ready"
            if late.state == "sent" and late.tsn in sack.dup_tsns:
                late.state = "done"

    # abandonment ------------------------------------------------------------
    def abandon(self, msg: OutMessage) -> None:
        for ch in msg.chunks:
            ch.abandoned = True
        self.pending = deque(ch for ch in self.pending if ch.msg is not msg)

    def advance_apap(self) -> None:
        self.apap = max(self.apap, self.cum_ack)
        while True:
            ch = self.sent.get(self.apap + 1)
            if ch is None or not (ch.abandoned or ch.gap_acked):
                break
            self.apap += 1

    def forward_tsn(self) -> wire.ForwardTsnChunk:
        last_ssn = {}
        for t in range(self.cum_ack + 1, self.apap + 1):
            ch = self.sent.get(t)
            if ch is not None and ch.abandoned and ch.msg.ordered:
                last_ssn[ch.msg.stream] = ch.msg.ssn
        return wire.ForwardTsnChunk(self.apap, tuple(sorted(last_ssn.items())))

    # transmission -----------------------------------------------------------
    def data_packet(self, chunks) -> SctpPacket:
        return SctpPacket(self.header(), tuple(ch.to_chunk(self.cfg.ppid) for ch in chunks))

    def tick(self, now: int) -> list:
        cfg = self.cfg
        out = []
        if self.phase in (COOKIE_WAIT, COOKIE_ECHOED):
            if now - self.hs_last >= cfg.rto:
                if self.hs_tries > cfg.max_init_retries:
                    raise HandshakeFailed(f"no answer after {self.hs_tries} attempts")
                self.hs_tries += 1
                self.hs_last = now
                if self.phase == COOKIE_WAIT:
                    out.append((self.init_packet(), cfg.primary_path, SEND))
                else:
                    out.append((SctpPacket(self.header(), (wire.CookieEchoChunk(self.cookie),)),
                                cfg.primary_path, SEND))
            return out
        if self.phase != ESTABLISHED:
            return out

        # covert late chunks (HY1)
        for late in self.hy1.values():
            resend = late.state == "sent" and now - late.last_sent >= cfg.rto
            if late.state == "ready" or resend:
                ch = late.chunk
                pkt = SctpPacket(self.header(), (wire.DataChunk(late.tsn, ch.msg.stream, 0, cfg.ppid,
                                                                ch.msg.covert_data, ch.flags),))
                out.append((pkt, cfg.primary_path, RETRANSMIT if resend else SEND))
                late.state = "sent"
                late.last_sent = now

        # timeouts
        for tsn in sorted(self.sent):
            ch = self.sent[tsn]
            if ch.withheld or ch.gap_acked or ch.abandoned or now - ch.last_sent < cfg.rto:
                continue
            if cfg.partial_reliability and ch.msg.max_retrans is not None and ch.retrans >= ch.msg.max_retrans:
                self.abandon(ch.msg)
                continue
            ch.retrans += 1
            ch.last_sent = now
            if ch.path is None or ch.retrans == 1:
                ch.path = self.retransmit_path(ch)
            out.append((self.data_packet([ch]), ch.path, RETRANSMIT))

        # forward tsn
        if cfg.partial_reliability:
            self.advance_apap()
            if self.apap > self.cum_ack:
                stale = self.ft_sent_at is None or now - self.ft_sent_at >= cfg.rto
                if stale or self.ft_value != self.apap:
                    self.ft_sent_at = now
                    self.ft_value = self.apap
                    out.append((SctpPacket(self.header(), (self.forward_tsn(),)), cfg.primary_path, FORWARD_TSN))

        # new data
        if self.pending and now >= self.next_data_tick:
            batch = []
            size = wire.HEADER_LEN
            while self.pending and len(batch) < cfg.chunks_per_packet:
                ch = self.pending[0]
                clen = 16 + len(ch.data)
                clen += -clen % 4
                if batch and size + clen > cfg.mtu - 20:
                    break
                self.pending.popleft()
                ch.tsn = self.next_tsn
                self.next_tsn += 1
                ch.first_sent = ch.last_sent = now
                self.sent[ch.tsn] = ch
                if ch.msg.covert == "hy1" or (ch.msg.covert == "hy2" and not ch.flags & wire.FLAG_E):
                    ch.withheld = ch.abandoned = True
                    if ch.msg.covert == "hy1":
                        self.hy1[ch.tsn] = CovertLate(ch.tsn, ch)
                    continue
                batch.append(ch)
                size += clen
            if batch:
                self.next_data_tick = now + cfg.send_interval
                for ch in batch:
                    ch.path = None
                dropped = [ch for ch in batch if self.self_drop(ch)]
                out.append((self.data_packet(batch), cfg.primary_path, SEND, bool(dropped)))
        return out


# -- receiver -----------------------------------------------------------------

class Receiver:
    """Endpoint B.  Usable inside :class:`Association` or standalone for replays.

    With ``covert_aware`` set it also keeps the data of late chunks whose TSN
    was skipped by a FORWARD TSN (``covert_hy1``) and of message fragments
    orphaned by one (``covert_hy2``).  A standards-faithful receiver drops both.
    """

    def __init__(self, cfg: AssocConfig | None = None, rng: random.Random | None = None,
                 covert_aware: bool = False):
        self.cfg = cfg or AssocConfig()
        self.rng = rng or random.Random(0)
        self.covert_aware = covert_aware
        self.phase = CLOSED
        self.my_tag = self.rng.getrandbits(32) or 1
        self.peer_tag = 0
        self.cum = None
        self.above: set[int] = set()
        self.buffer: dict[int, wire.DataChunk] = {}
        self.skipped: set[int] = set()
        self.dups: list[int] = []
        self.next_ssn = defaultdict(int)
        self.queued = defaultdict(dict)
        self.delivered: list[DeliveredMessage] = []
        self.covert_hy1: dict[int, bytes] = {}
        self.covert_hy2: dict[int, bytes] = {}
        self.on_deliver: Callable[[DeliveredMessage], None] = lambda m: None
        self.sack_path: Callable[[wire.SackChunk, tuple], tuple] = lambda sack, path: (path[1], path[0])
        self.sack_transform: Callable[[wire.SackChunk], wire.SackChunk] = lambda sack: sack
        self.unsacked = 0
        self.last_path = None

    def header(self) -> wire.CommonHeader:
        return wire.CommonHeader(self.cfg.dst_port, self.cfg.src_port, self.peer_tag)

    def on_packet(self, pkt: SctpPacket, path, now: int) -> list:
        out = []
        need_sack = False
        immediate = False
        for c in pkt.chunks:
            if isinstance(c, wire.InitChunk) and type(c) is wire.InitChunk:
                out.extend(self._on_init(c, path))
            elif isinstance(c, wire.CookieEchoChunk):
                self.phase = ESTABLISHED
                out.append((SctpPacket(self.header(), (wire.CookieAckChunk(),)), (path[1], path[0]), SEND))
            elif isinstance(c, wire.DataChunk):
                if self.cum is None:
                    continue
                immediate |= self._on_data(c)
                need_sack = True
            elif isinstance(c, wire.ForwardTsnChunk):
                if self.cum is None:
                    continue
                self._on_forward_tsn(c)
                need_sack = immediate = True
            elif isinstance(c, wire.HeartbeatChunk):
                ack = wire.RawChunk(HEARTBEAT_ACK, 0, wire.encode_params(c.params))
                out.append((SctpPacket(self.header(), (ack,)), (path[1], path[0]), SEND))
        if need_sack:
            self.unsacked += 1
            self.last_path = path
            if not self.cfg.delayed_sack or immediate or self.unsacked >= 2 or self.above:
                out.append(self._sack(path))
        return out

    def tick(self, now: int) -> list:
        if self.cfg.delayed_sack and self.unsacked and self.last_path is not None:
            return [self._sack(self.last_path)]
        return []

    def _on_init(self, c: wire.InitChunk, path):
        self.peer_tag = c.initiate_tag
        if self.cum is None:
            self.cum = c.initial_tsn - 1
        cookie = self.rng.randbytes(16)
        params = [wire.VarParam(wire.STATE_COOKIE, cookie)]
        if len(self.cfg.receiver_addrs) > 1:
            params += [address_param(a) for a in self.cfg.receiver_addrs]
        ack = wire.InitAckChunk(self.my_tag, self.cfg.a_rwnd, self.cfg.stream_count, self.cfg.stream_count,
                                self.rng.randrange(1, 1 << 24), tuple(params))
        return [(SctpPacket(self.header(), (ack,)), (path[1], path[0]), SEND)]

    def _sack(self, path):
        self.unsacked = 0
        gaps = []
        for t in sorted(self.above):
            off = t - self.cum
            if gaps and gaps[-1][1] == off - 1:
                gaps[-1][1] = off
            else:
                gaps.append([off, off])
        sack = wire.SackChunk(self.cum, self.cfg.a_rwnd, tuple(map(tuple, gaps)), tuple(self.dups))
        self.dups = []
        sack = self.sack_transform(sack)
        return (SctpPacket(self.header(), (sack,)), self.sack_path(sack, path), SACK)

    def _advance(self) -> None:
        while self.cum + 1 in self.above:
            self.cum += 1
            self.above.discard(self.cum)

    def _on_data(self, c: wire.DataChunk) -> bool:
        t = c.tsn
        if t <= self.cum or t in self.above:
            self.dups.append(t)
            if self.covert_aware and t in self.skipped and t not in self.covert_hy1:
                self.covert_hy1[t] = c.data
            return True
        self.above.add(t)
        self.buffer[t] = c
        self._advance()
        self._assemble(t)
        self._scan_orphans()
        return bool(self.above)

    def _on_forward_tsn(self, c: wire.ForwardTsnChunk) -> None:
        new = c.new_cum_tsn
        if new > self.cum:
            for t in range(self.cum + 1, new + 1):
                if t in self.above:
                    self.above.discard(t)
                else:
                    self.skipped.add(t)
            self.cum = new
            self._advance()
        for si, ssn in c.streams:
            if ssn >= self.next_ssn[si]:
                self.next_ssn[si] = ssn + 1
                for old in [s for s in self.queued[si] if s <= ssn]:
                    del self.queued[si][old]
                self._drain(si)
        self._scan_orphans()

    def _assemble(self, t: int) -> None:
        buf = self.buffer
        b = t
        while not buf[b].beginning:
            if b - 1 not in buf:
                return
            b -= 1
        e = t
        while not buf[e].ending:
            if e + 1 not in buf:
                return
            e += 1
        frags = [buf[x] for x in range(b, e + 1)]
        first = frags[0]
        if any(f.stream != first.stream or f.unordered != first.unordered for f in frags):
            return
        for x in range(b, e + 1):
            del buf[x]
        msg = DeliveredMessage(first.stream, first.ssn, not first.unordered, b"".join(f.data for f in frags))
        if first.unordered:
            self._deliver(msg)
        else:
            if msg.ssn >= self.next_ssn[msg.stream]:
                self.queued[msg.stream][msg.ssn] = msg
            self._drain(msg.stream)

    def _drain(self, stream: int) -> None:
        q = self.queued[stream]
        while self.next_ssn[stream] in q:
            self._deliver(q.pop(self.next_ssn[stream]))
            self.next_ssn[stream] += 1

    def _deliver(self, msg: DeliveredMessage) -> None:
        self.delivered.append(msg)
        self.on_deliver(msg)

    def _scan_orphans(self) -> None:
        if not self.skipped:
            return
        buf = self.buffer
        for t in sorted(buf):
            if t not in buf:
                continue
            orphan = False
            b = t
            while not buf[b].beginning:
                if b - 1 in self.skipped:
                    orphan = True
                    break
                if b - 1 not in buf:
                    break
                b -= 1
            e = t
            while not buf[e].ending:
                if e + 1 in self.skipped:
                    orphan = True
                    break
                if e + 1 not in buf:
                    break
                e += 1
            if not orphan:
                continue
            data = b"".join(buf[x].data for x in range(b, e + 1))
            for x in range(b, e + 1):
                del buf[x]
            if self.covert_aware:
                self.covert_hy2[b] = data


# -- association ----------------------------------------------------------------

@dataclass
class RunResult:
    events: list[SimEvent]
    delivered: list[DeliveredMessage]


class Association:
    def __init__(self, cfg: AssocConfig, covert_aware: bool = False):
        self.cfg = cfg
        seed = cfg.seed
        self.loss_rng = random.Random(f"{seed}:loss")
        self.sender = Sender(cfg, random.Random(f"{seed}:A"))
        self.receiver = Receiver(cfg, random.Random(f"{seed}:B"), covert_aware)
        self.receiver.on_deliver = self._on_deliver
        self.now = 0
        self.events: list[SimEvent] = []
        self._seq = 0
        self._wire: list = []
        self._first_drop_done: set[int] = set()

    # bookkeeping ---------------------------------------------------------------
    def _log(self, kind, endpoint, packet=None, path=None, message=None) -> SimEvent:
        ev = SimEvent(self.now, self._seq, kind, endpoint, packet, path, message)
        self._seq += 1
        self.events.append(ev)
        return ev

    def _on_deliver(self, msg: DeliveredMessage) -> None:
        self._log(APP_DELIVERY, "B", message=msg)

    @property
    def delivered(self) -> list[DeliveredMessage]:
        return self.receiver.delivered

    @property
    def phase(self) -> str:
        return self.sender.phase

    def _transmit(self, endpoint: str, item) -> None:
        pkt, path, kind = item[:3]
        self_dropped = len(item) > 3 and item[3]
        self._log(kind, endpoint, pkt, path)
        lost = self_dropped
        if not lost and endpoint == "A" and kind == SEND and pkt.chunks and isinstance(pkt.chunks[0], wire.DataChunk):
            for c in pkt.chunks:
                offset = c.tsn - self.sender.initial_tsn
                if offset in self.cfg.drop_first and offset not in self._first_drop_done:
                    self._first_drop_done.add(offset)
                    lost = True
        if not lost:
            handshake = any(isinstance(c, (wire.InitChunk, wire.CookieEchoChunk, wire.CookieAckChunk))
                            for c in pkt.chunks)
            lossy = (endpoint == "A" or self.cfg.ack_loss) and (not handshake or self.cfg.handshake_loss)
            p = self.cfg.loss_for(path if endpoint == "A" else (path[1], path[0]))
            # always draw so the loss stream does not depend on which packets are lossy
            draw = self.loss_rng.random()
            lost = lossy and draw < p
        if lost:
            self._log(LOSE, endpoint, pkt, path)
            return
        heapq.heappush(self._wire, (self.now + self.cfg.delay, self._seq, endpoint, pkt, path))

    def step(self) -> None:
        now = self.now
        while self._wire and self._wire[0][0] <= now:
            _, _, origin, pkt, path = heapq.heappop(self._wire)
            target = "B" if origin == "A" else "A"
            self._log(DELIVER, target, pkt, path)
            if target == "B":
                for item in self.receiver.on_packet(pkt, path, now):
                    self._transmit("B", item)
            else:
                for item in self.sender.on_packet(pkt, path, now):
                    self._transmit("A", item)
        for item in self.receiver.tick(now):
            self._transmit("B", item)
        for item in self.sender.tick(now):
            self._transmit("A", item)
        if self.cfg.heartbeat_interval and self.sender.phase == ESTABLISHED and now % self.cfg.heartbeat_interval == 0:
            self._heartbeat(now)
        self.now += 1

    def _heartbeat(self, now: int) -> None:
        paths = [(s, r) for s in self.cfg.sender_addrs for r in self.cfg.receiver_addrs]
        path = paths[(now // self.cfg.heartbeat_interval) % len(paths)]
        info = struct.pack("!QI", now, paths.index(path)) + bytes(28)
        hb = wire.HeartbeatChunk((wire.VarParam(wire.HEARTBEAT_INFO, info),))
        self._transmit("A", (SctpPacket(self.sender.header(), (hb,)), path, SEND))

    # public API ------------------------------------------------------------------
    def handshake(self, max_ticks: int = 1000) -> None:
        for item in self.sender.start(self.now):
            self._transmit("A", item)
        self.now += 1
        while self.sender.phase != ESTABLISHED:
            if max_ticks <= 0:
                raise HandshakeFailed("handshake did not complete")
            self.step()
            max_ticks -= 1

    def send_message(self, stream: int, data: bytes, ordered: bool = True, *, max_retrans: int | None = None,
                     covert: str | None = None, covert_data: bytes = b"") -> OutMessage:
        if self.sender.phase != ESTABLISHED:
            raise NotEstablished("association is not established")
        if not 0 <= stream < self.cfg.stream_count:
            raise BadStream(f"stream {stream} outside 0..{self.cfg.stream_count - 1}")
        return self.sender.enqueue(stream, bytes(data), ordered, max_retrans, covert, covert_data)

    def run(self, ticks: int) -> RunResult:
        if self.sender.phase != ESTABLISHED:
            raise NotEstablished("association is not established")
        for _ in range(ticks):
            self.step()
        return RunResult(self.events, self.delivered)

    def idle(self) -> bool:
        return not self._wire and self.sender.idle()

    def run_until_idle(self, max_ticks: int = 100_000, settle: int = 0) -> RunResult:
        for _ in range(max_ticks):
            if self.idle():
                break
            self.step()
        self.run(settle)
        return RunResult(self.events, self.delivered)


@dataclass(frozen=True)
class TrafficProfile:
    """Fixed-size messages spread round-robin over the streams."""

    messages: int = 40
    size: int = 100
    ordered: bool = True
    streams: int | None = None  # defaults to every stream of the association

    def load(self, assoc: "Association") -> None:
        rng = random.Random(f"{assoc.cfg.seed}:traffic")
        n = self.streams or assoc.cfg.stream_count
        for i in range(self.messages):
            assoc.send_message(i % n, rng.randbytes(self.size), self.ordered)


def simulate(cfg: AssocConfig, profile: TrafficProfile | None = None, covert_aware: bool = False,
             settle: int = 10, max_ticks: int = 100_000) -> Association:
    """Establish, queue the profile's traffic and run until the sender is idle."""
    assoc = establish(cfg, covert_aware)
    (profile or TrafficProfile()).load(assoc)
    assoc.run_until_idle(max_ticks, settle)
    return assoc


def establish(cfg: AssocConfig, covert_aware: bool = False) -> Association:
    """Create an association and complete the four-way handshake."""
    assoc = Association(cfg, covert_aware)
    assoc.handshake()
    return assoc


# -- observation helpers ----------------------------------------------------------

def tsn_ordered_streams(events, endpoint: str = "B") -> list[int]:
    """Stream ids of distinct DATA chunks that reached *endpoint*, in TSN order."""
    seen = {}
    for ev in events:
        if ev.kind == DELIVER and ev.endpoint == endpoint:
            for c in ev.packet.chunks:
                if isinstance(c, wire.DataChunk):
                    seen.setdefault(c.tsn, c.stream)
    return [seen[t] for t in sorted(seen)]


def replay(records, cfg: AssocConfig | None = None, covert_aware: bool = False) -> Receiver:
    """Feed captured packets addressed to the receiver into a fresh :class:`Receiver`."""
    cfg = cfg or AssocConfig()
    rx = Receiver(cfg, random.Random("replay"), covert_aware)
    local = set(cfg.receiver_addrs)
    for i, rec in enumerate(records):
        if rec.dst in local:
            rx.on_packet(rec.packet, (rec.src, rec.dst), rec.tick)
    return rx
