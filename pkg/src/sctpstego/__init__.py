"""Covert channels in SCTP: wire codec, channel implementations, simulator and steganalysis."""

from .bits import BitString
from .core import ChannelId, CapacityEntry, capacity, capacity_table, throughput

__version__ = "0.1.0"

__all__ = ["BitString", "CapacityEntry", "ChannelId", "capacity", "capacity_table", "throughput", "__version__"]
