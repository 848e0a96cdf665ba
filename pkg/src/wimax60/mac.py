"""Generic MAC PDU: 48-bit header with HCS, payload, optional CRC-32.

Header layout, MSB first::

    byte 0   HT(1) EC(1) TYPE(6)
    byte 1   RSV(1) CI(1) EKS(2) RSV(1) LEN[10:8](3)
    byte 2   LEN[7:0]
    byte 3-4 CID
    byte 5   HCS = CRC-8 (x^8 + x^2 + x + 1, init 0) over bytes 0-4

When CI is set, a CRC-32 of the header and payload follows the payload,
most significant byte first. Encryption (EC=1) is carried as a flag only.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CrcMismatchError,
    GeometryError,
    HcsMismatchError,
    LengthOverflowError,
    TruncatedInputError,
)

HEADER_BYTES = 6
HEADER_BITS = 8 * HEADER_BYTES
CRC_BYTES = 4
MAX_LEN = 2047

HCS_POLY = 0x07

# (name, width) in transmission order
HEADER_FIELDS = (
    ("ht", 1),
    ("ec", 1),
    ("ptype", 6),
    ("rsv1", 1),
    ("ci", 1),
    ("eks", 2),
    ("rsv2", 1),
    ("len", 11),
    ("cid", 16),
    ("hcs", 8),
)


def _make_crc8_table(poly: int) -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table.append(crc)
    return table


_CRC8_TABLE = _make_crc8_table(HCS_POLY)


def crc8(data: bytes, init: int = 0) -> int:
    crc = init
    for b in data:
        crc = _CRC8_TABLE[crc ^ b]
    return crc


def crc32(data: bytes) -> int:
    # reflected 0x04C11DB7, init and xorout all-ones
    return zlib.crc32(data) & 0xFFFFFFFF


@dataclass(frozen=True)
class MacHeader:
    ht: int = 0
    ec: int = 0
    ptype: int = 0
    rsv1: int = 0
    ci: int = 0
    eks: int = 0
    rsv2: int = 0
    len: int = HEADER_BYTES
    cid: int = 0
    hcs: int = 0

    def __post_init__(self):
        for name, width in HEADER_FIELDS:
            v = getattr(self, name)
            if not 0 <= v < (1 << width):
                raise GeometryError(f"header field {name}={v} does not fit in {width} bits")

    def pack_fields(self) -> int:
        word = 0
        for name, width in HEADER_FIELDS:
            word = (word << width) | getattr(self, name)
        return word

    def to_bytes(self) -> bytes:
        return self.pack_fields().to_bytes(HEADER_BYTES, "big")

    def first_five(self) -> bytes:
        return self.to_bytes()[:5]

    @classmethod
    def from_bytes(cls, raw: bytes) -> "MacHeader":
        if len(raw) < HEADER_BYTES:
            raise TruncatedInputError(f"need {HEADER_BYTES} header bytes, got {len(raw)}")
        word = int.from_bytes(raw[:HEADER_BYTES], "big")
        values = {}
        shift = HEADER_BITS
        for name, width in HEADER_FIELDS:
            shift -= width
            values[name] = (word >> shift) & ((1 << width) - 1)
        return cls(**values)

    def with_hcs(self) -> "MacHeader":
        return replace(self, hcs=crc8(self.first_five()))


@dataclass(frozen=True)
class MacPdu:
    header: MacHeader
    payload: bytes = b""
    payload_crc: int | None = None

    def __post_init__(self):
        if (self.payload_crc is not None) != bool(self.header.ci):
            raise GeometryError("payload_crc must be present exactly when ci=1")
        expected = HEADER_BYTES + len(self.payload) + (CRC_BYTES if self.header.ci else 0)
        if self.header.len != expected:
            raise GeometryError(f"header len {self.header.len} != serialized size {expected}")

    def to_bytes(self) -> bytes:
        out = self.header.to_bytes() + bytes(self.payload)
        if self.header.ci:
            out += self.payload_crc.to_bytes(CRC_BYTES, "big")
        return out


def build_pdu(
    payload: bytes,
    cid: int = 0,
    *,
    ht: int = 0,
    ec: int = 0,
    ptype: int = 0,
    eks: int = 0,
    ci: int = 0,
) -> MacPdu:
    """Assemble a PDU, filling LEN, HCS and (when ``ci``) the payload CRC-32."""
    payload = bytes(payload)
    total = HEADER_BYTES + len(payload) + (CRC_BYTES if ci else 0)
    if total > MAX_LEN:
        raise LengthOverflowError(f"PDU of {total} bytes exceeds the 11-bit length field ({MAX_LEN})")
    header = MacHeader(ht=ht, ec=ec, ptype=ptype, ci=ci, eks=eks, len=total, cid=cid).with_hcs()
    crc = crc32(header.to_bytes() + payload) if ci else None
    return MacPdu(header, payload, crc)


def serialize_pdu(pdu: MacPdu) -> np.ndarray:
    """MSB-first bit array (uint8 0/1) of length ``8 * header.len``."""
    return np.unpackbits(np.frombuffer(pdu.to_bytes(), dtype=np.uint8))


def _bits_to_bytes(bits) -> bytes:
    b = np.asarray(bits, dtype=np.uint8)
    if b.size % 8:
        raise GeometryError(f"bit count {b.size} is not a whole number of bytes")
    return np.packbits(b).tobytes()


def parse_pdu(bits) -> MacPdu:
    """Inverse of :func:`serialize_pdu`; verifies HCS and, when present, CRC-32.

    Bits beyond ``8 * len`` are ignored.
    """
    b = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if b.size < HEADER_BITS:
        raise TruncatedInputError(f"need at least {HEADER_BITS} bits, got {b.size}")
    raw_header = _bits_to_bytes(b[:HEADER_BITS])
    expected_hcs = crc8(raw_header[:5])
    if expected_hcs != raw_header[5]:
        raise HcsMismatchError(expected_hcs, raw_header[5])
    header = MacHeader.from_bytes(raw_header)
    if header.len < HEADER_BYTES + (CRC_BYTES if header.ci else 0):
        raise GeometryError(f"header len {header.len} too small")
    if b.size < 8 * header.len:
        raise TruncatedInputError(f"PDU declares {8 * header.len} bits, got {b.size}")
    body = _bits_to_bytes(b[HEADER_BITS : 8 * header.len])
    crc = None
    if header.ci:
        payload, tail = body[:-CRC_BYTES], body[-CRC_BYTES:]
        crc = int.from_bytes(tail, "big")
        expected = crc32(raw_header + payload)
        if crc != expected:
            raise CrcMismatchError(expected, crc)
    else:
        payload = body
    return MacPdu(header, payload, crc)


def header_hex(pdu: MacPdu) -> str:
    return pdu.to_bytes().hex()
