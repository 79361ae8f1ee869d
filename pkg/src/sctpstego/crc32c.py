"""CRC32c (Castagnoli), reflected polynomial 0x82F63B78."""

from __future__ import annotations

_POLY = 0x82F63B78


def _make_table() -> tuple[int, ...]:
    table = []
    for i in range(256):
        c = i
        for _ in range(8):
            c = (c >> 1) ^ _POLY if c & 1 else c >> 1
        table.append(c)
    return tuple(table)


_TABLE = _make_table()


def _crc32c_table(data: bytes, crc: int = 0) -> int:
    c = crc ^ 0xFFFFFFFF
    table = _TABLE
    for b in data:
        c = table[(c ^ b) & 0xFF] ^ (c >> 8)
    return c ^ 0xFFFFFFFF


try:
    from crc32c import crc32c as _crc32c_native
except ImportError:  # pure-Python fallback, roughly 50x slower
    _crc32c_native = None


def crc32c(data: bytes, crc: int = 0) -> int:
    """Return the CRC32c of *data*; pass a previous result as *crc* to continue it."""
    if _crc32c_native is not None:
        return _crc32c_native(data, crc)
    return _crc32c_table(data, crc)


def crc32c_bitwise(data: bytes) -> int:
    # Table-free reference, used only to cross-check the table.
    c = 0xFFFFFFFF
    for b in data:
        c ^= b
        for _ in range(8):
            c = (c >> 1) ^ _POLY if c & 1 else c >> 1
    return c ^ 0xFFFFFFFF
