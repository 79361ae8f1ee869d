import struct

import pytest
from hypothesis import given, strategies as st

from oracles import crc32c_ref
from sctpstego import wire
from sctpstego.errors import BadChecksum, BadLengthField, BodyMismatch, Oversize, Truncated
from sctpstego.wire import CommonHeader, SctpPacket

HDR = CommonHeader(5000, 5001, 0x01020304)


def test_minimal_pad_packet_is_20_bytes():
    raw = wire.encode_packet(SctpPacket(HDR, (wire.PadChunk(bytes(4)),)))
    assert len(raw) == 20
    assert raw[12:16] == bytes([wire.PAD, 0, 0, 8])


def test_data_chunk_layout_by_hand():
    raw = wire.DataChunk(1, 0, 0, 0, b"AB").encode()
    expected = bytes.fromhex("00 03 0012 00000001 0000 0000 00000000") + b"AB" + b"\0\0"
    assert raw == expected
    assert struct.unpack("!H", raw[2:4])[0] == 18
    assert len(raw) == 20


def test_header_and_checksum_layout():
    pkt = SctpPacket(HDR, (wire.DataChunk(1, 0, 0, 0, b"AB"),))
    raw = wire.encode_packet(pkt)
    assert raw[:8] == bytes.fromhex("1388 1389 01020304")
    zeroed = raw[:8] + bytes(4) + raw[12:]
    assert struct.unpack("!I", raw[8:12])[0] == crc32c_ref(zeroed)
    assert wire.packet_checksum(raw) == crc32c_ref(zeroed)


def test_truncated_and_bad_checksum():
    raw = wire.encode_packet(SctpPacket(HDR, (wire.DataChunk(1, 0, 0, 0, b"AB"),)))
    with pytest.raises(Truncated):
        wire.decode_packet(raw[:12])
    flipped = bytearray(raw)
    flipped[-3] ^= 0x01
    with pytest.raises(BadChecksum):
        wire.decode_packet(bytes(flipped))
    # switched off, the same bytes decode
    assert wire.decode_packet(bytes(flipped), verify_crc=False).chunks[0].data == b"AC"


def test_bad_chunk_length_rejected():
    raw = bytearray(wire.encode_packet(SctpPacket(HDR, (wire.PadChunk(bytes(4)),))))
    raw[14:16] = struct.pack("!H", 40)
    with pytest.raises(BadLengthField):
        wire.decode_packet(bytes(raw), verify_crc=False)


def test_parameter_padding_not_counted_for_last_parameter():
    init = wire.InitChunk(7, 65536, 1, 1, 9, (wire.VarParam(wire.PADDING, b"\0" * 5),
                                              wire.VarParam(wire.PADDING, b"\0" * 3)))
    raw = init.encode()
    # 20 header + (9 + 3 pad) + 7, last parameter's padding is chunk padding
    assert struct.unpack("!H", raw[2:4])[0] == 20 + 12 + 7
    assert len(raw) % 4 == 0


def test_ipv4_parameter_length_checked():
    with pytest.raises(BodyMismatch):
        wire.VarParam(wire.IPV4_ADDRESS, b"\1\2\3").encode()


def test_oversize():
    pkt = SctpPacket(HDR, (wire.PadChunk(bytes(2000)),))
    with pytest.raises(Oversize):
        wire.encode_packet(pkt, max_size=wire.DEFAULT_MAX_PACKET)


def test_unknown_chunk_is_opaque():
    raw = wire.encode_packet(SctpPacket(HDR, (wire.RawChunk(0x55, 0x81, b"\x01\x02\x03"),)))
    pkt = wire.decode_packet(raw)
    assert isinstance(pkt.chunks[0], wire.RawChunk)
    assert wire.encode_packet(pkt) == raw


def test_well_ordered_predicate():
    sack = wire.SackChunk(5)
    d1, d2 = wire.DataChunk(6, 0, 0), wire.DataChunk(7, 0, 1)
    assert wire.is_well_ordered(SctpPacket(HDR, (sack, d1, d2)))
    assert not wire.is_well_ordered(SctpPacket(HDR, (d1, sack)))
    assert not wire.is_well_ordered(SctpPacket(HDR, (d2, d1)))


u16 = st.integers(0, 0xFFFF)
u32 = st.integers(0, 0xFFFFFFFF)
ipv4 = st.builds(lambda b: wire.VarParam(wire.IPV4_ADDRESS, b), st.binary(min_size=4, max_size=4))
params = st.lists(st.one_of(ipv4, st.builds(wire.VarParam, st.just(wire.PADDING), st.binary(max_size=13)),
                            st.builds(wire.VarParam, st.just(0x8123), st.binary(max_size=9))), max_size=3)
chunks = st.one_of(
    st.builds(wire.DataChunk, u32, u16, u16, u32, st.binary(max_size=40), st.integers(0, 7)),
    st.builds(wire.InitChunk, st.integers(1, 0xFFFFFFFF), u32, u16, st.integers(1, 0xFFFF), u32,
              params.map(tuple)),
    st.builds(wire.InitAckChunk, st.integers(1, 0xFFFFFFFF), u32, u16, st.integers(1, 0xFFFF), u32,
              params.map(tuple)),
    st.builds(wire.SackChunk, u32, u32, st.lists(st.tuples(u16, u16), max_size=3).map(tuple),
              st.lists(u32, max_size=3).map(tuple)),
    st.builds(wire.ForwardTsnChunk, u32, st.lists(st.tuples(u16, u16), max_size=3).map(tuple)),
    st.builds(wire.AuthChunk, u16, u16, st.binary(max_size=32)),
    st.builds(wire.PadChunk, st.binary(max_size=21)),
    st.builds(wire.AsconfChunk, u32, st.lists(ipv4, min_size=1, max_size=2).map(tuple)),
    st.builds(wire.RawChunk, st.sampled_from([0x40, 0x55, 0xC5]), st.integers(0, 255), st.binary(max_size=11)),
)
packets = st.builds(SctpPacket, st.builds(CommonHeader, u16, u16, u32),
                    st.lists(chunks, min_size=1, max_size=5).map(tuple))


@given(packets)
def test_round_trip(pkt):
    raw = wire.encode_packet(pkt)
    assert len(raw) % 4 == 0
    back = wire.decode_packet(raw)
    assert back == pkt
    assert wire.encode_packet(back) == raw


@given(chunks)
def test_chunks_occupy_multiples_of_four(chunk):
    raw = chunk.encode()
    assert len(raw) % 4 == 0
    assert struct.unpack("!H", raw[2:4])[0] == chunk.length <= len(raw) < chunk.length + 4
