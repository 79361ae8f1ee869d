"""Shared scenario builders for the detector and acceptance tests."""

import random

from sctpstego import capture, fields, framing, hybrid, multihome, simnet, streams, wire
from sctpstego.bits import BitString
from sctpstego.core import ChannelId
from sctpstego.simnet import AssocConfig, TrafficProfile, establish

MH_SENDER = ("10.0.0.1", "10.0.0.2", "10.0.0.3")
MH_RECEIVER = ("10.0.1.1", "10.0.1.2", "10.0.1.3")


def clean_config(seed: int) -> AssocConfig:
    """A varied but covert-free association, deterministic in *seed*."""
    rng = random.Random(seed)
    multi = rng.random() < 0.5
    return AssocConfig(stream_count=rng.choice([1, 2, 4, 5, 8]), seed=seed, loss=rng.choice([0.0, 0.05, 0.1]),
                       ack_loss=rng.random() < 0.3, partial_reliability=rng.random() < 0.5,
                       sender_addrs=MH_SENDER if multi else ("10.0.0.1",),
                       receiver_addrs=MH_RECEIVER if multi else ("10.0.1.1",),
                       fragmentation_threshold=rng.choice([200, 1400]),
                       heartbeat_interval=rng.choice([0, 7]))


def clean_capture(seed: int, messages: int = 30):
    cfg = clean_config(seed)
    profile = TrafficProfile(messages, random.Random(seed).choice([50, 300]),
                             ordered=random.Random(seed + 1).random() < 0.7)
    assoc = simnet.simulate(cfg, profile)
    return capture.records_from_events(assoc.events)


def round_robin_capture(seed: int, n: int = 4, messages: int = 60):
    assoc = simnet.simulate(AssocConfig(stream_count=n, seed=seed), TrafficProfile(messages, 40))
    return capture.records_from_events(assoc.events)


def ms_capture(bits, n: int, k: int, seed: int = 0, loss: float = 0.0):
    """Live association whose DATA stream ids spell one MS frame."""
    assoc = establish(AssocConfig(stream_count=n, seed=seed, loss=loss))
    rng = random.Random(seed)
    carrier = streams.MessageScheduler.synthetic(n, 0)
    ids = streams.frame_stream_ids(bits, n, k)
    for s in ids:
        carrier.add(s, rng.randbytes(40))
    for d in streams.msd_send(bits, n, k, carrier):
        assoc.send_message(d.stream, d.data)
    assoc.run_until_idle(settle=5)
    return assoc


def cover_sequence(channel, count: int, seed: int, **kw):
    rng = random.Random(seed)
    return [fields.cover_packet(channel, rng, serial=i + 1, **kw) for i in range(count)]


def field_capture(channel, payload: bytes, seed: int = 0):
    """Crafted packets plus the indices whose bytes differ from honest cover."""
    pkts = framing.craft_field(channel, BitString.from_bytes(payload), random.Random(seed))
    covers = cover_sequence(channel, len(pkts), seed, key_count=16, padding_len=8)
    changed = [i for i, (p, c) in enumerate(zip(pkts, covers)) if wire.encode_packet(p) != wire.encode_packet(c)]
    return pkts, changed


def hy_run(variant, payload: bytes, seed: int = 0, loss: float = 0.0, per: int = 16, message_bytes: int = 216,
           threshold: int = 200, duty: float = 0.1, covert_aware: bool = True):
    cfg = AssocConfig(stream_count=2, partial_reliability=True, seed=seed, loss=loss,
                      fragmentation_threshold=threshold)
    assoc = establish(cfg, covert_aware)
    size = per if variant in ("HY1", ChannelId.HY1) else message_bytes - threshold * ((message_bytes - 1) // threshold)
    events = max(1, -(-len(payload) // size))
    TrafficProfile(events * int(round(1 / duty)) + 1, 40).load(assoc)
    if variant in ("HY1", ChannelId.HY1):
        hybrid.hy1_schedule(assoc, payload, duty, per)
    else:
        hybrid.hy2_schedule(assoc, payload, duty, message_bytes)
    assoc.run_until_idle(settle=10)
    return assoc


def mh_run(bits, seed: int = 0, loss: float = 0.0, mode: str = "active", messages: int | None = None):
    cfg = AssocConfig(stream_count=1, sender_addrs=MH_SENDER, receiver_addrs=MH_RECEIVER, seed=seed, loss=loss)
    assoc = establish(cfg)
    code = multihome.PathCode.from_config(cfg)
    chan = multihome.MultihomeSender(code, bits, mode).attach(assoc)
    TrafficProfile(messages or chan.events_needed + 1, 30).load(assoc)
    assoc.run_until_idle(settle=10)
    return assoc, code, chan
