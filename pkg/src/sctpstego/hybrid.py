"""Hybrid channels built on the partial-reliability FORWARD TSN.

HY1 withholds a dummy chunk, lets a FORWARD TSN skip its TSN, and sends the
chunk late with the steganogram once the receiver has acknowledged past it.
HY2 sends only the last fragment of a fragmented dummy message, with the
steganogram in it, and abandons the others so the fragment stays orphaned.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .core import ChannelId, throughput
from .errors import ExtensionDisabled, FragmentationNotForced, NoTraffic
from .simnet import Association, Receiver


@dataclass(frozen=True)
class HybridEvent:
    slot: int  # index in the overt message queue before which the dummy is inserted
    payload: bytes


@dataclass(frozen=True)
class HybridPlan:
    variant: ChannelId
    duty: float
    payload_bytes: int
    events: tuple[HybridEvent, ...] = ()
    message_bytes: int = 0

    def __post_init__(self):
        if not 0 < self.duty <= 1:
            raise ValueError("duty must lie in (0, 1]")
        if self.payload_bytes < 1:
            raise ValueError("payload_bytes must be positive")

    @property
    def period(self) -> int:
        return math.floor(1 / self.duty)


def event_slots(total: int, duty: float) -> list[int]:
    """Every floor(1/duty)-th packet out of *total* carries an event."""
    period = math.floor(1 / duty)
    return list(range(period - 1, total, period))


def _check(assoc: Association) -> int:
    if not assoc.cfg.partial_reliability:
        raise ExtensionDisabled("partial reliability is not enabled on this association")
    pending = [ch for ch in assoc.sender.pending if ch.msg.covert is None]
    if not pending:
        raise NoTraffic("no overt messages queued to hide covert events among")
    return len(pending)


def _plan(variant, assoc, steganogram, duty, payload_bytes, message_bytes=0) -> HybridPlan:
    total = _check(assoc)
    steganogram = bytes(steganogram)
    pieces = [steganogram[i:i + payload_bytes] for i in range(0, len(steganogram), payload_bytes)]
    slots = event_slots(total, duty)
    events = tuple(HybridEvent(s, p) for s, p in zip(slots, pieces))
    return HybridPlan(variant, duty, payload_bytes, events, message_bytes)


def install(assoc: Association, plan: HybridPlan) -> None:
    """Insert the plan's dummy messages into the sender's queue.

    Overt chunks keep their relative order; each dummy goes right after the
    overt packet that its slot selects.  Dummy cover bytes come from a
    generator seeded by the association seed.
    """
    sender = assoc.sender
    rng = random.Random(f"{assoc.cfg.seed}:cover")
    overt = list(sender.pending)
    sender.pending.clear()
    by_slot = {ev.slot: ev for ev in plan.events}
    dummies = {}
    for slot, ev in by_slot.items():
        if plan.variant is ChannelId.HY1:
            sender.enqueue(0, rng.randbytes(len(ev.payload)), False, covert="hy1", covert_data=ev.payload)
        else:
            sender.enqueue(0, rng.randbytes(plan.message_bytes), False, covert="hy2", covert_data=ev.payload)
        dummies[slot] = list(sender.pending)
        sender.pending.clear()
    for i, ch in enumerate(overt):
        sender.pending.append(ch)
        sender.pending.extend(dummies.get(i, ()))


def hy1_schedule(assoc: Association, steganogram: bytes, duty: float, payload_bytes: int | None = None,
                 apply: bool = True) -> HybridPlan:
    """Plan (and by default install) HY1 events over the queued overt traffic."""
    payload_bytes = payload_bytes or assoc.cfg.fragmentation_threshold
    if payload_bytes > assoc.cfg.fragmentation_threshold:
        raise ValueError("a covert chunk must fit in one fragment")
    plan = _plan(ChannelId.HY1, assoc, steganogram, duty, payload_bytes)
    if apply:
        install(assoc, plan)
    return plan


def hy2_schedule(assoc: Association, steganogram: bytes, duty: float, message_bytes: int,
                 apply: bool = True) -> HybridPlan:
    """Plan HY2 events; each dummy message of *message_bytes* must fragment."""
    thr = assoc.cfg.fragmentation_threshold
    if message_bytes <= thr:
        raise FragmentationNotForced(f"{message_bytes} bytes fit in one {thr}-byte fragment")
    last = message_bytes - thr * ((message_bytes - 1) // thr)
    plan = _plan(ChannelId.HY2, assoc, steganogram, duty, last, message_bytes)
    if apply:
        install(assoc, plan)
    return plan


def hy_extract(receiver: Receiver | Association, variant) -> bytes:
    """Covert bytes collected by a covert-aware receiver, in TSN order."""
    if isinstance(receiver, Association):
        receiver = receiver.receiver
    store = receiver.covert_hy1 if ChannelId(variant) is ChannelId.HY1 else receiver.covert_hy2
    return b"".join(store[t] for t in sorted(store))


def hy_rate(packets_per_second: float, payload_bytes: int, duty: float) -> float:
    """Covert bits per second for one event every 1/duty packets."""
    return throughput(8 * payload_bytes, packets_per_second, duty)
