import random

import pytest
from hypothesis import given, strategies as st

from sctpstego.bits import BitString


def test_basic_conversions():
    assert BitString.from_bytes(b"\xa0") == "10100000"
    assert BitString.from_int(5, 4) == "0101"
    assert BitString("101").to_bytes() == b"\xa0"
    assert BitString("0011").take(6) == ("001100", 4)
    assert isinstance(BitString("01") + "1", BitString)


def test_rejects_non_bits():
    with pytest.raises(ValueError):
        BitString("012")
    with pytest.raises(ValueError):
        BitString.from_int(8, 3)


@given(st.binary(max_size=64))
def test_bytes_round_trip(data):
    assert BitString.from_bytes(data).to_bytes() == data


def test_random_is_seeded():
    assert BitString.random(50, random.Random(3)) == BitString.random(50, random.Random(3))
    assert len(BitString.random(0, random.Random(3))) == 0
