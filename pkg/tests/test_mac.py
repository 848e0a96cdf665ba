from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wimax60.errors import CrcMismatchError, HcsMismatchError, LengthOverflowError, TruncatedInputError
from wimax60.mac import HEADER_BITS, MAX_LEN, MacHeader, build_pdu, crc8, crc32, parse_pdu, serialize_pdu

FIXTURES = Path(__file__).parent / "fixtures"


def crc8_long_division(data: bytes) -> int:
    """Remainder of M(x) * x^8 mod x^8 + x^2 + x + 1 over GF(2)."""
    poly = 0x107
    m = int.from_bytes(data, "big") << 8 if data else 0
    for bit in range(m.bit_length() - 1, 7, -1):
        if m >> bit & 1:
            m ^= poly << (bit - 8)
    return m


def crc32_bitwise(data: bytes) -> int:
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (0xEDB88320 if crc & 1 else 0)
    return crc ^ 0xFFFFFFFF


def load_vectors():
    rows = []
    for line in (FIXTURES / "mac_vectors.txt").read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        payload, cid, ht, ec, ptype, eks, ci, pdu = line.split()
        payload = b"" if payload == "-" else bytes.fromhex(payload)
        flags = dict(ht=int(ht, 0), ec=int(ec, 0), ptype=int(ptype, 0), eks=int(eks, 0), ci=int(ci, 0))
        rows.append((payload, int(cid, 0), flags, pdu))
    return rows


def test_crc8_oracle_known_values():
    # x^8 mod g(x) = x^2 + x + 1
    assert crc8_long_division(b"\x01") == 0x07
    assert crc8_long_division(b"") == 0


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=64))
def test_crc8_matches_long_division(data):
    assert crc8(data) == crc8_long_division(data)


def test_crc32_check_value():
    assert crc32(b"123456789") == 0xCBF43926
    assert crc32_bitwise(b"123456789") == 0xCBF43926


@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=200))
def test_crc32_matches_bitwise(data):
    assert crc32(data) == crc32_bitwise(data)


def test_empty_pdu():
    pdu = build_pdu(b"", 0)
    raw = pdu.to_bytes()
    assert len(raw) == 6
    assert pdu.header.len == 6
    # with init 0, a leading zero byte leaves the remainder unchanged
    assert raw[5] == crc8_long_division(bytes([0, 0, 6, 0, 0])) == crc8_long_division(bytes([0, 0, 0, 6, 0, 0]))
    assert raw[5] == 0x7D


@pytest.mark.parametrize("payload,cid,flags,expected", load_vectors())
def test_hex_fixtures(payload, cid, flags, expected):
    pdu = build_pdu(payload, cid, **flags)
    assert pdu.to_bytes().hex() == expected
    raw = bytes.fromhex(expected)
    assert raw[5] == crc8_long_division(raw[:5])
    if flags["ci"]:
        assert int.from_bytes(raw[-4:], "big") == crc32_bitwise(raw[:-4])
    assert parse_pdu(serialize_pdu(pdu)) == pdu


def test_field_order_msb_first():
    h = MacHeader(ht=1, ec=0, ptype=0b101010, ci=1, eks=0b11, len=0x5A5, cid=0xC3C3).with_hcs()
    bits = np.unpackbits(np.frombuffer(h.to_bytes(), dtype=np.uint8))
    widths = [1, 1, 6, 1, 1, 2, 1, 11, 16, 8]
    values = [1, 0, 0b101010, 0, 1, 0b11, 0, 0x5A5, 0xC3C3, h.hcs]
    pos = 0
    for w, v in zip(widths, values):
        assert int("".join(map(str, bits[pos : pos + w])), 2) == v
        pos += w
    assert pos == 48


def test_bit_zero_is_ht():
    for ht in (0, 1):
        assert serialize_pdu(build_pdu(b"ab", 7, ht=ht))[0] == ht


@pytest.mark.parametrize("ci", [0, 1])
def test_every_single_header_flip_is_detected(ci):
    bits = serialize_pdu(build_pdu(b"\x10\x20\x30", 0x0A0B, ptype=3, ci=ci))
    detected = 0
    for i in range(HEADER_BITS):
        bad = bits.copy()
        bad[i] ^= 1
        with pytest.raises(HcsMismatchError):
            parse_pdu(bad)
        detected += 1
    assert detected == 48


def test_hcs_error_names_values():
    bits = serialize_pdu(build_pdu(b"", 0))
    bits[47] ^= 1
    with pytest.raises(HcsMismatchError) as exc:
        parse_pdu(bits)
    assert exc.value.expected == 0x7D and exc.value.actual == 0x7C
    assert "0x7D" in str(exc.value)


def test_payload_flip_breaks_crc():
    bits = serialize_pdu(build_pdu(bytes(range(20)), 1, ci=1))
    for i in range(HEADER_BITS, bits.size):
        bad = bits.copy()
        bad[i] ^= 1
        with pytest.raises(CrcMismatchError):
            parse_pdu(bad)


def test_ci_round_trip_recovers_payload():
    payload = bytes(range(256)) * 3
    pdu = build_pdu(payload, 0x4242, ci=1)
    got = parse_pdu(serialize_pdu(pdu))
    assert got.payload == payload
    assert got.payload_crc == crc32_bitwise(pdu.to_bytes()[:-4])


def test_length_overflow():
    with pytest.raises(LengthOverflowError):
        build_pdu(bytes(2048))
    build_pdu(bytes(MAX_LEN - 6))
    with pytest.raises(LengthOverflowError):
        build_pdu(bytes(MAX_LEN - 6), ci=1)


def test_truncated_input():
    with pytest.raises(TruncatedInputError):
        parse_pdu(np.zeros(40, dtype=np.uint8))
    bits = serialize_pdu(build_pdu(b"abcdef"))
    with pytest.raises(TruncatedInputError):
        parse_pdu(bits[:-8])


def test_trailing_bits_ignored():
    pdu = build_pdu(b"xyz", 9)
    bits = np.concatenate([serialize_pdu(pdu), np.ones(13, dtype=np.uint8)])
    assert parse_pdu(bits) == pdu


@settings(max_examples=150, deadline=None)
@given(
    payload=st.binary(max_size=300),
    cid=st.integers(0, 0xFFFF),
    ht=st.integers(0, 1),
    ec=st.integers(0, 1),
    ptype=st.integers(0, 63),
    eks=st.integers(0, 3),
    ci=st.integers(0, 1),
)
def test_round_trip_property(payload, cid, ht, ec, ptype, eks, ci):
    pdu = build_pdu(payload, cid, ht=ht, ec=ec, ptype=ptype, eks=eks, ci=ci)
    bits = serialize_pdu(pdu)
    assert bits.size == 8 * pdu.header.len
    assert bits.size % 8 == 0
    # reserved bits sit at positions 8 and 12
    assert bits[8] == 0 and bits[12] == 0
    assert parse_pdu(bits) == pdu
