import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from sctpstego import simnet, wire
from sctpstego.errors import BadStream, NotEstablished
from sctpstego.simnet import (APP_DELIVERY, DELIVER, LOSE, RETRANSMIT, SEND, AssocConfig, TrafficProfile,
                              establish, simulate)


def log_bytes(assoc):
    return "\n".join(ev.to_json() for ev in assoc.events)


def lost_first(seed=0):
    assoc = establish(AssocConfig(stream_count=3, drop_first=frozenset({0}), seed=seed))
    for stream, data in ((1, b"A"), (1, b"B"), (2, b"C"), (2, b"D")):
        assoc.send_message(stream, data)
    assoc.run_until_idle(settle=5)
    return assoc


def test_handshake_order():
    assoc = establish(AssocConfig())
    assert assoc.phase == simnet.ESTABLISHED
    sent = [ev.packet.chunks[0].name for ev in assoc.events if ev.kind == SEND]
    assert sent == ["INIT", "INIT_ACK", "COOKIE_ECHO", "COOKIE_ACK"]
    delivered = [ev.packet.chunks[0].name for ev in assoc.events if ev.kind == DELIVER]
    assert delivered == sent
    assert not any(isinstance(c, wire.DataChunk) for ev in assoc.events if ev.packet for c in ev.packet.chunks)


def test_initiate_tag_echoed():
    assoc = simulate(AssocConfig(), TrafficProfile(messages=4))
    init = next(ev.packet.chunks[0] for ev in assoc.events if ev.kind == SEND)
    ack = next(ev.packet.chunks[0] for ev in assoc.events if ev.kind == SEND and ev.endpoint == "B")
    for ev in assoc.events:
        if ev.kind != SEND or isinstance(ev.packet.chunks[0], wire.InitChunk):
            continue
        peer_tag = ack.initiate_tag if ev.endpoint == "A" else init.initiate_tag
        assert ev.packet.header.verification_tag == peer_tag


def test_handshake_deterministic():
    a = establish(AssocConfig(seed=3))
    b = establish(AssocConfig(seed=3))
    assert log_bytes(a) == log_bytes(b)
    assert log_bytes(a) != log_bytes(establish(AssocConfig(seed=4)))


def test_lost_message_delivery_order():
    assoc = lost_first()
    apps = [(ev.tick, ev.message.data) for ev in assoc.events if ev.kind == APP_DELIVERY]
    order = [d for _, d in apps]
    assert order.index(b"C") < order.index(b"A")
    assert order.index(b"D") < order.index(b"A")
    assert order.index(b"A") < order.index(b"B")
    retrans = next(ev for ev in assoc.events if ev.kind == RETRANSMIT)
    a_arrival = next(ev for ev in assoc.events if ev.kind == DELIVER and ev.seq > retrans.seq)
    ticks = dict((d, t) for t, d in apps)
    assert ticks[b"C"] < a_arrival.tick and ticks[b"D"] < a_arrival.tick
    assert any(ev.kind == LOSE for ev in assoc.events)


def test_errors_before_and_outside_streams():
    assoc = simnet.Association(AssocConfig())
    with pytest.raises(NotEstablished):
        assoc.send_message(0, b"x")
    assoc = establish(AssocConfig(stream_count=2))
    with pytest.raises(BadStream):
        assoc.send_message(2, b"x")


def test_fragmentation():
    assoc = establish(AssocConfig(stream_count=1))
    assoc.send_message(0, bytes(100))
    assoc.send_message(0, bytes(range(256)) * 10 + bytes(240))
    assoc.run_until_idle(settle=3)
    data = [c for ev in assoc.events if ev.kind == SEND and ev.endpoint == "A"
            for c in ev.packet.chunks if isinstance(c, wire.DataChunk)]
    assert data[0].flags & 3 == 3
    assert [len(c.data) for c in data[1:]] == [1400, 1400]
    assert [c.flags & 3 for c in data[1:]] == [wire.FLAG_B, wire.FLAG_E]
    assert [m.data for m in assoc.delivered] == [bytes(100), bytes(range(256)) * 10 + bytes(240)]


def test_unordered_delivered_on_arrival():
    assoc = establish(AssocConfig(stream_count=1, drop_first=frozenset({0})))
    assoc.send_message(0, b"ordered")
    assoc.send_message(0, b"loose", ordered=False)
    assoc.run_until_idle(settle=5)
    assert [m.data for m in assoc.delivered] == [b"loose", b"ordered"]


def test_multihomed_retransmission_uses_other_path():
    cfg = AssocConfig(sender_addrs=("10.0.0.1", "10.0.0.2"), receiver_addrs=("10.0.1.1", "10.0.1.2"),
                      drop_first=frozenset({2}))
    assoc = simulate(cfg, TrafficProfile(messages=5))
    retrans = [ev for ev in assoc.events if ev.kind == RETRANSMIT]
    assert retrans
    primary = tuple(simnet.as_address(a) for a in cfg.primary_path)
    assert all(tuple(ev.path) != primary for ev in retrans)


def delivered_by_stream(msgs):
    out = {}
    for m in msgs:
        out.setdefault(m.stream, []).append(m.data)
    return out


@settings(max_examples=25)
@given(st.integers(0, 10 ** 6), st.sampled_from([0.0, 0.1, 0.3]), st.booleans())
def test_reliability_and_determinism(seed, loss, ack_loss):
    cfg = AssocConfig(seed=seed, loss=loss, ack_loss=ack_loss)
    profile = TrafficProfile(messages=30, size=60)
    a = simulate(cfg, profile)
    b = simulate(cfg, profile)
    assert log_bytes(a) == log_bytes(b)
    rng = random.Random(f"{seed}:traffic")
    sent = {}
    for i in range(30):
        sent.setdefault(i % 4, []).append(rng.randbytes(60))
    assert delivered_by_stream(a.delivered) == sent
    ticks = [(ev.tick, ev.seq) for ev in a.events]
    assert ticks == sorted(ticks)


@settings(max_examples=20)
@given(st.integers(0, 10 ** 6))
def test_stream_isolation(seed):
    # a loss on one stream never delays delivery on another: every message that arrives is
    # delivered in the same tick unless an earlier message of its own stream is missing
    assoc = simulate(AssocConfig(seed=seed, loss=0.2), TrafficProfile(messages=40, size=30))
    arrived = {}
    for ev in assoc.events:
        if ev.kind == DELIVER and ev.endpoint == "B":
            for c in ev.packet.chunks:
                if isinstance(c, wire.DataChunk):
                    arrived.setdefault((c.stream, c.ssn), ev.tick)
    app = {(ev.message.stream, ev.message.ssn): ev.tick for ev in assoc.events if ev.kind == APP_DELIVERY}
    for (stream, ssn), tick in app.items():
        earlier = [arrived[(stream, s)] for s in range(ssn + 1)]
        assert tick == max(earlier)


@settings(max_examples=20)
@given(st.integers(0, 10 ** 6))
def test_abandonment_never_retransmits_forwarded(seed):
    cfg = AssocConfig(seed=seed, loss=0.3, partial_reliability=True)
    assoc = establish(cfg)
    rng = random.Random(seed)
    for i in range(30):
        assoc.send_message(i % 4, rng.randbytes(20), max_retrans=rng.choice([0, 1, None]))
    assoc.run_until_idle(settle=10)
    forwarded = 0
    for ev in assoc.events:
        if ev.endpoint != "A" or ev.kind not in (SEND, RETRANSMIT) or ev.packet is None:
            continue
        for c in ev.packet.chunks:
            if isinstance(c, wire.ForwardTsnChunk):
                assert c.new_cum_tsn >= forwarded
                forwarded = c.new_cum_tsn
            elif isinstance(c, wire.DataChunk) and ev.kind == RETRANSMIT:
                assert c.tsn > forwarded
    cums = [c.cum_tsn for ev in assoc.events if ev.kind == SEND and ev.endpoint == "B" and ev.packet
            for c in ev.packet.chunks if isinstance(c, wire.SackChunk)]
    assert cums == sorted(cums)


def test_event_json_lines():
    assoc = establish(AssocConfig())
    rows = [json.loads(ev.to_json()) for ev in assoc.events]
    assert {"tick", "kind", "path", "packet"} <= set(rows[0])
    assert bytes.fromhex(rows[0]["packet"]) == assoc.events[0].raw()
