"""MSB-first bit strings used as the steganogram payload type."""

from __future__ import annotations

from random import Random

_VALID = frozenset("01")


class BitString(str):
    """An immutable string of ``'0'``/``'1'`` characters.

    Subclasses :class:`str` so literals like ``"1011"`` compare equal, while
    slicing and concatenation keep returning :class:`BitString`.  Byte
    conversion is MSB-first: bit 0 is the most significant bit of byte 0.
    """

    __slots__ = ()

    def __new__(cls, bits: str = "") -> "BitString":
        bits = str(bits)
        if not _VALID.issuperset(bits):
            raise ValueError(f"not a bit string: {bits!r}")
        return super().__new__(cls, bits)

    def __add__(self, other: str) -> "BitString":
        return BitString(str.__add__(self, BitString(other)))

    def __radd__(self, other: str) -> "BitString":
        return BitString(str.__add__(BitString(other), self))

    def __getitem__(self, key) -> "BitString":
        return BitString(str.__getitem__(self, key))

    def __repr__(self) -> str:
        return f"BitString({str.__repr__(self)})"

    @classmethod
    def from_bytes(cls, data: bytes, nbits: int | None = None) -> "BitString":
        s = "".join(f"{b:08b}" for b in data)
        if nbits is not None:
            if nbits > len(s):
                raise ValueError("nbits exceeds available bits")
            s = s[:nbits]
        return cls(s)

    @classmethod
    def from_int(cls, value: int, width: int) -> "BitString":
        if value < 0 or value >> width:
            raise ValueError(f"{value} does not fit in {width} bits")
        return cls(format(value, f"0{width}b") if width else "")

    @classmethod
    def from_hex(cls, text: str) -> "BitString":
        return cls.from_bytes(bytes.fromhex(text))

    @classmethod
    def random(cls, nbits: int, rng: Random) -> "BitString":
        if nbits == 0:
            return cls()
        return cls.from_int(rng.getrandbits(nbits), nbits)

    def to_int(self) -> int:
        return int(self, 2) if self else 0

    def to_bytes(self) -> bytes:
        """Materialize as bytes, zero-padding the last byte on the right."""
        if not self:
            return b""
        padded = self.ljust(-(-len(self) // 8) * 8, "0")
        return int(padded, 2).to_bytes(len(padded) // 8, "big")

    def take(self, width: int) -> tuple["BitString", int]:
        """Return the first *width* bits left-aligned and zero-padded, and how many were real."""
        head = self[:width]
        return BitString(head.ljust(width, "0")), len(head)

    def chunks(self, width: int) -> list["BitString"]:
        return [self[i:i + width] for i in range(0, len(self), width)]


EMPTY = BitString()
