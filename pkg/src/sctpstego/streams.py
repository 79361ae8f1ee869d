"""Multi-streaming channel: bits carried by the stream each DATA chunk uses.

Groups of ``k`` consecutive chunks (in TSN order) form a k-tuple of stream
identifiers.  All ``n**k`` tuples are ranked lexicographically; the first
``2**F`` get F-bit codes (``F = floor(log2(n**k))``) counting up from zero and
the rest get (F+1)-bit codes, again counting up from zero.  A tuple always
conveys at least F bits.

The framed protocol (:func:`msd_send` / :func:`msd_receive`) is

1. a start sequence on streams ``n-1 .. 0``;
2. four chunks whose stream parity spells ``k`` MSB-first (even = 0);
3. a 32-bit steganogram length and then the steganogram, both group-coded.
"""

from __future__ import annotations

import io
import math
import random
from collections import defaultdict, deque
from dataclasses import dataclass
from functools import cached_property
from itertools import product

from .bits import BitString
from .errors import InsufficientCarrier, LengthOverrun, MalformedFrame, TooLarge, UnknownGroup

MAX_ENTRIES = 1 << 20
LENGTH_BITS = 32
GROUP_SIZE_BITS = 4


class GroupCodebook:
    """Code assignment for k-tuples of ``n`` stream identifiers.

    Codes are computed arithmetically, so the object is cheap even for
    ``n**k`` far beyond what :attr:`entries` can materialize.
    """

    def __init__(self, n: int, k: int):
        if n < 2 or k < 1:
            raise ValueError("need n >= 2 streams and group size k >= 1")
        self.n = n
        self.k = k
        self.size = n ** k
        self.short_len = self.size.bit_length() - 1  # F
        self.long_count = self.size - (1 << self.short_len)  # tuples with F+1-bit codes

    def __repr__(self) -> str:
        return f"GroupCodebook(n={self.n}, k={self.k})"

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupCodebook) and (self.n, self.k) == (other.n, other.k)

    def __hash__(self) -> int:
        return hash((self.n, self.k))

    @property
    def max_code_len(self) -> int:
        return self.short_len + (self.long_count > 0)

    def index_of(self, group) -> int:
        group = tuple(group)
        if len(group) != self.k or any(not 0 <= s < self.n for s in group):
            raise UnknownGroup(f"{group} is not a group of {self.k} streams out of {self.n}")
        idx = 0
        for s in group:
            idx = idx * self.n + s
        return idx

    def group_at(self, index: int) -> tuple[int, ...]:
        digits = []
        for _ in range(self.k):
            index, d = divmod(index, self.n)
            digits.append(d)
        return tuple(reversed(digits))

    def code_of_index(self, index: int) -> BitString:
        f = self.short_len
        if index < (1 << f):
            return BitString.from_int(index, f)
        return BitString.from_int(index - (1 << f), f + 1)

    def code(self, group) -> BitString:
        return self.code_of_index(self.index_of(group))

    def lookup(self, code: str) -> tuple[int, ...]:
        """Tuple carrying *code*, or :class:`UnknownGroup`."""
        f = self.short_len
        v = int(code, 2) if code else 0
        if len(code) == f:
            return self.group_at(v)
        if len(code) == f + 1 and v < self.long_count:
            return self.group_at((1 << f) + v)
        raise UnknownGroup(f"no group carries code {code!r}")

    @cached_property
    def entries(self) -> dict[tuple[int, ...], BitString]:
        if self.size > MAX_ENTRIES:
            raise TooLarge(f"{self.n}^{self.k} entries exceed {MAX_ENTRIES}")
        return {g: self.code_of_index(i) for i, g in enumerate(product(range(self.n), repeat=self.k))}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("tuple,code\n")
        for g, code in self.entries.items():
            buf.write(" ".join(map(str, g)) + "," + code + "\n")
        return buf.getvalue()

    # -- greedy encoding on integers; shared by the channel and the experiment --

    def encode_counts(self, value: int, nbits: int) -> tuple[list[int], int]:
        """Greedy longest-match over an *nbits*-bit payload given as an int.

        Returns tuple indices and the number of zero padding bits appended.
        """
        f = self.short_len
        long_count = self.long_count
        out = []
        remaining = nbits
        while remaining > 0:
            if remaining > f and long_count:
                head = value >> (remaining - f - 1)
                if head < long_count:
                    out.append((1 << f) + head)
                    remaining -= f + 1
                    value &= (1 << remaining) - 1
                    continue
            if remaining >= f:
                out.append(value >> (remaining - f))
                remaining -= f
                value &= (1 << remaining) - 1
            else:
                out.append(value << (f - remaining))
                return out, f - remaining
        return out, 0


def build_codebook(n: int, k: int, max_entries: int = MAX_ENTRIES) -> GroupCodebook:
    if n < 2 or k < 1:
        raise ValueError("need n >= 2 streams and group size k >= 1")
    if n ** k > max_entries:
        raise TooLarge(f"{n}^{k} entries exceed {max_entries}")
    return GroupCodebook(n, k)


def encode_stream_ids(cb: GroupCodebook, payload) -> tuple[list[tuple[int, ...]], int]:
    """Greedy longest-match encoding of *payload* into stream-id groups.

    Returns the groups and the count of zero untapped bits padding the last
    group.
    """
    payload = BitString(payload)
    indices, untapped = cb.encode_counts(payload.to_int(), len(payload))
    return [cb.group_at(i) for i in indices], untapped


def decode_stream_ids(cb: GroupCodebook, groups, declared_len: int) -> BitString:
    bits = "".join(cb.code(g) for g in groups)
    if declared_len > len(bits):
        raise LengthOverrun(f"declared {declared_len} bits but groups carry {len(bits)}")
    return BitString(bits[:declared_len])


def ms_bandwidth(s: int, k: int) -> tuple[float, float]:
    """(maximum, guaranteed lower bound) bits per chunk for s streams and groups of k."""
    if s < 2 or k < 1:
        raise ValueError("need s >= 2 and k >= 1")
    return math.log2(s), ((s ** k).bit_length() - 1) / k


# -- MSD framing ------------------------------------------------------------

def frame_stream_ids(steganogram, n: int, k: int) -> list[int]:
    """Stream identifier sequence for one complete frame."""
    if n < 2:
        raise ValueError("need at least two streams")
    if not 1 <= k < (1 << GROUP_SIZE_BITS):
        raise ValueError(f"group size must be in 1..{(1 << GROUP_SIZE_BITS) - 1}")
    steganogram = BitString(steganogram)
    cb = GroupCodebook(n, k)
    ids = list(range(n - 1, -1, -1))
    ids += [int(b) for b in format(k, f"0{GROUP_SIZE_BITS}b")]
    length = len(steganogram)
    if length >> LENGTH_BITS:
        raise ValueError("steganogram too long for the length field")
    for field_bits in (BitString.from_int(length, LENGTH_BITS), steganogram):
        if field_bits:
            groups, _ = encode_stream_ids(cb, field_bits)
            for g in groups:
                ids.extend(g)
    return ids


@dataclass(frozen=True)
class SendDirective:
    stream: int
    data: bytes


class MessageScheduler:
    """Pending application messages per stream, consumed by covert directives."""

    def __init__(self, pending: dict[int, list[bytes]] | None = None):
        self._queues = defaultdict(deque)
        for stream, msgs in (pending or {}).items():
            self._queues[stream].extend(msgs)

    @classmethod
    def synthetic(cls, n: int, per_stream: int, size: int = 64, rng=None) -> "MessageScheduler":
        rng = rng or random.Random(0)
        return cls({s: [rng.randbytes(size) for _ in range(per_stream)] for s in range(n)})

    def add(self, stream: int, data: bytes) -> None:
        self._queues[stream].append(data)

    def available(self, stream: int) -> int:
        return len(self._queues[stream])

    def take(self, stream: int) -> bytes:
        if not self._queues[stream]:
            raise InsufficientCarrier(f"no pending message on stream {stream}")
        return self._queues[stream].popleft()


def msd_send(steganogram, n: int, k: int, carrier: MessageScheduler) -> list[SendDirective]:
    """Attach one frame to pending carrier messages, one message per chunk."""
    ids = frame_stream_ids(steganogram, n, k)
    need = defaultdict(int)
    for s in ids:
        need[s] += 1
    short = {s: c for s, c in need.items() if carrier.available(s) < c}
    if short:
        raise InsufficientCarrier(f"not enough cover traffic on streams {sorted(short)}")
    return [SendDirective(s, carrier.take(s)) for s in ids]


def _parse_frame(observed: list[int], start: int, n: int) -> BitString:
    pos = start + n
    parity = observed[pos:pos + GROUP_SIZE_BITS]
    if len(parity) < GROUP_SIZE_BITS:
        raise MalformedFrame("frame ends inside the group-size field")
    k = int("".join(str(s & 1) for s in parity), 2)
    if k == 0:
        raise MalformedFrame("group size 0")
    pos += GROUP_SIZE_BITS
    cb = GroupCodebook(n, k)

    def read(nbits: int) -> BitString:
        nonlocal pos
        bits = ""
        while len(bits) < nbits:
            group = observed[pos:pos + k]
            if len(group) < k:
                raise MalformedFrame("frame ends inside a group")
            try:
                bits += cb.code(group)
            except UnknownGroup as exc:
                raise MalformedFrame(str(exc)) from None
            pos += k
        return BitString(bits[:nbits])

    length = read(LENGTH_BITS).to_int()
    return read(length)


def find_start(observed: list[int], n: int, begin: int = 0) -> int | None:
    target = list(range(n - 1, -1, -1))
    for i in range(begin, len(observed) - n + 1):
        if observed[i:i + n] == target:
            return i
    return None


def msd_receive(observed, n: int) -> BitString | None:
    """Recover a steganogram from TSN-ordered stream ids.

    Returns ``None`` when no start sequence is present.  Candidate starts that
    fail to parse are skipped; if every candidate fails the last
    :class:`MalformedFrame` is raised.
    """
    observed = list(observed)
    pos = 0
    error = None
    while (start := find_start(observed, n, pos)) is not None:
        try:
            return _parse_frame(observed, start, n)
        except MalformedFrame as exc:
            error = exc
            pos = start + 1
    if error is not None:
        raise error
    return None
