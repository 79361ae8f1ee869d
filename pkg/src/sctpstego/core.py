"""Channel identities, the capacity registry, and throughput arithmetic."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Union


class ChannelId(str, enum.Enum):
    I1 = "I1"
    I2 = "I2"
    D1 = "D1"
    D2 = "D2"
    S1 = "S1"
    S2 = "S2"
    A1 = "A1"
    P1 = "P1"
    VP1 = "VP1"
    VP2 = "VP2"
    VP3 = "VP3"
    VP4 = "VP4"
    VP5 = "VP5"
    MS = "MS"
    CO = "CO"
    CC = "CC"
    HY1 = "HY1"
    HY2 = "HY2"
    MH = "MH"

    def __str__(self) -> str:
        return self.value


FIELD_CHANNELS = tuple(ChannelId)[:13]

VARIES = "varies"
Capacity = Union[int, tuple[int, int], str]


@dataclass(frozen=True)
class CapacityEntry:
    channel: ChannelId
    bits_per_unit: Capacity
    unit: str  # "chunk", "parameter" or "packet"
    formula: str = ""

    def allows(self, bits: int) -> bool:
        """Whether a per-unit capacity of *bits* is consistent with this entry."""
        if isinstance(self.bits_per_unit, int):
            return bits == self.bits_per_unit
        if isinstance(self.bits_per_unit, tuple):
            lo, hi = self.bits_per_unit
            return lo <= bits <= hi
        return bits >= 0

    def describe(self) -> str:
        b = self.bits_per_unit
        if isinstance(b, tuple):
            b = f"{b[0]}-{b[1]}"
        return f"{b} bits/{self.unit}" if b != VARIES else f"varies ({self.formula or 'n/a'})"


_TABLE = (
    CapacityEntry(ChannelId.I1, 32, "chunk"),
    CapacityEntry(ChannelId.I2, 8, "chunk"),
    CapacityEntry(ChannelId.D1, 16, "chunk"),
    CapacityEntry(ChannelId.D2, 32, "chunk"),
    CapacityEntry(ChannelId.S1, (3, 4), "chunk"),
    CapacityEntry(ChannelId.S2, (3, 4), "chunk"),
    CapacityEntry(ChannelId.A1, (1, 4), "chunk"),
    CapacityEntry(ChannelId.P1, VARIES, "chunk", "8 x padding length"),
    CapacityEntry(ChannelId.VP1, 32, "parameter"),
    CapacityEntry(ChannelId.VP2, 320, "chunk"),
    # The parameter itself can hold 32 bytes; the table value is kept as published.
    CapacityEntry(ChannelId.VP3, 32, "chunk"),
    CapacityEntry(ChannelId.VP4, 32, "parameter"),
    CapacityEntry(ChannelId.VP5, VARIES, "parameter", "8 x padding length"),
    CapacityEntry(ChannelId.MS, VARIES, "chunk", "log2(s) max, floor(log2(s^k))/k guaranteed"),
    CapacityEntry(ChannelId.CO, VARIES, "packet", "floor(log2(m!)) for m reorderable chunks"),
    CapacityEntry(ChannelId.CC, VARIES, "packet", "log2(floor(MTU_data / r))"),
    CapacityEntry(ChannelId.HY1, VARIES, "packet", "8 x chunk payload x duty"),
    CapacityEntry(ChannelId.HY2, VARIES, "packet", "8 x last-fragment payload x duty"),
    CapacityEntry(ChannelId.MH, VARIES, "chunk", "log2(n1) + log2(n2) per retransmission"),
)


def capacity_table() -> list[CapacityEntry]:
    return list(_TABLE)


def capacity(channel: ChannelId | str) -> CapacityEntry:
    channel = ChannelId(channel)
    return next(e for e in _TABLE if e.channel is channel)


def throughput(bits_per_unit, units_per_second, duty=1) -> float | Fraction:
    """Covert bits per second: bits per unit x units per second x fraction of units used."""
    for name, v in (("bits_per_unit", bits_per_unit), ("units_per_second", units_per_second), ("duty", duty)):
        if v < 0:
            raise ValueError(f"{name} must be nonnegative")
    return bits_per_unit * units_per_second * duty
