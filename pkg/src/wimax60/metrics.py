"""Link measurements (BER, SER, EVM), link reports and the I/Q capture file format.

Capture layout (all little-endian)::

    0   8  magic  b"IQCAP\\0\\0\\0"
    8   4  version (u32) = 1
    12  8  sample_rate (f64, Hz)
    20  8  center_freq (f64, Hz, informational)
    28  8  sample_count (u64)
    36  .. sample_count pairs of f32 (I, Q)
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .dsp import SampleBuffer
from .errors import BadMagicError, CaptureError, GeometryError, TruncatedPayloadError, VersionMismatchError

CAPTURE_MAGIC = b"IQCAP\x00\x00\x00"
CAPTURE_VERSION = 1
_HEADER = struct.Struct("<8sIddQ")
HEADER_SIZE = _HEADER.size  # 36


@dataclass
class BitCount:
    bits_compared: int
    bit_errors: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_compared if self.bits_compared else 0.0


def ber_count(tx_bits, rx_bits) -> BitCount:
    a = np.asarray(tx_bits, dtype=np.uint8).reshape(-1)
    b = np.asarray(rx_bits, dtype=np.uint8).reshape(-1)
    if a.size != b.size:
        raise GeometryError(f"bit streams differ in length: {a.size} vs {b.size}")
    return BitCount(int(a.size), int(np.count_nonzero(a != b)))


def symbol_errors(tx_bits, rx_bits, bits_per_symbol: int = 2) -> tuple[int, int]:
    """(symbols compared, symbols with at least one bit error)."""
    a = np.asarray(tx_bits, dtype=np.uint8).reshape(-1, bits_per_symbol)
    b = np.asarray(rx_bits, dtype=np.uint8).reshape(-1, bits_per_symbol)
    if a.shape != b.shape:
        raise GeometryError("bit streams differ in length")
    return a.shape[0], int(np.count_nonzero(np.any(a != b, axis=1)))


def evm_rms(equalized, reference) -> float:
    """RMS error vector magnitude in percent, normalized by the reference RMS."""
    x = np.asarray(equalized, dtype=np.complex128).reshape(-1)
    r = np.asarray(reference, dtype=np.complex128).reshape(-1)
    if x.size != r.size:
        raise GeometryError(f"EVM inputs differ in length: {x.size} vs {r.size}")
    if x.size == 0:
        raise GeometryError("EVM of an empty vector is undefined")
    ref_power = float(np.mean(np.abs(r) ** 2))
    if ref_power == 0.0:
        raise GeometryError("reference has zero power")
    return 100.0 * math.sqrt(float(np.mean(np.abs(x - r) ** 2)) / ref_power)


def qfunc(x):
    return 0.5 * special.erfc(np.asarray(x) / math.sqrt(2.0))


def qpsk_ber_theory(ebn0_db):
    """Gray-coded QPSK over AWGN: Q(sqrt(2 Eb/N0))."""
    ebn0 = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    return qfunc(np.sqrt(2.0 * ebn0))


def qpsk_ebn0_for_ber(ber):
    """Inverse of :func:`qpsk_ber_theory`, in dB."""
    x = special.erfcinv(2.0 * np.asarray(ber, dtype=float)) * math.sqrt(2.0)
    return 10.0 * np.log10(x * x / 2.0)


@dataclass
class LinkReport:
    bits_compared: int = 0
    bit_errors: int = 0
    symbols_compared: int = 0
    symbol_errors: int = 0
    evm_rms: float = 0.0
    erasures: int = 0
    pdus_sent: int = 0
    pdus_ok: int = 0
    seed: int = 0
    ebn0_db: float | None = None
    noise_variance: float = 0.0
    estimator: str = ""
    profile: str = ""
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.bit_errors <= self.bits_compared:
            raise GeometryError("bit_errors must lie in [0, bits_compared]")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_compared if self.bits_compared else 0.0

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols_compared if self.symbols_compared else 0.0

    def check_consistency(self) -> None:
        """SER and BER of Gray QPSK over the same symbols satisfy BER <= SER <= 2 BER."""
        if self.symbols_compared * 2 != self.bits_compared:
            return
        if not (self.ber <= self.ser + 1e-15 and self.ser <= 2 * self.ber + 1e-15):
            raise AssertionError(f"inconsistent SER {self.ser} / BER {self.ber}")

    def to_text(self) -> str:
        rows = {
            "bits_compared": self.bits_compared,
            "bit_errors": self.bit_errors,
            "ber": self.ber,
            "symbols_compared": self.symbols_compared,
            "symbol_errors": self.symbol_errors,
            "ser": self.ser,
            "evm_rms_pct": self.evm_rms,
            "erasures": self.erasures,
            "pdus_sent": self.pdus_sent,
            "pdus_ok": self.pdus_ok,
            "seed": self.seed,
            "ebn0_db": self.ebn0_db,
            "noise_variance": self.noise_variance,
            "estimator": self.estimator,
            "profile": self.profile,
        }
        out = io.StringIO()
        for k, v in rows.items():
            out.write(f"{k} = {_fmt(v)}\n")
        for k, v in self.config.items():
            out.write(f"config.{k} = {_fmt(v)}\n")
        return out.getvalue()

    CSV_FIELDS = ("ebn0_db", "bits_compared", "bit_errors", "ber", "ser", "evm_rms_pct", "erasures")

    def csv_row(self) -> str:
        vals = (self.ebn0_db, self.bits_compared, self.bit_errors, self.ber, self.ser, self.evm_rms, self.erasures)
        return ",".join(_fmt(v) for v in vals)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def capture_bytes(buf: SampleBuffer, center_freq: float = 0.0) -> bytes:
    x = buf.samples
    if not np.all(np.isfinite(x)):
        raise GeometryError("capture samples must be finite")
    iq = np.empty(2 * x.size, dtype="<f4")
    iq[0::2] = x.real
    iq[1::2] = x.imag
    return _HEADER.pack(CAPTURE_MAGIC, CAPTURE_VERSION, float(buf.sample_rate), float(center_freq), x.size) + iq.tobytes()


def capture_write(buf: SampleBuffer, path, center_freq: float = 0.0) -> None:
    Path(path).write_bytes(capture_bytes(buf, center_freq))


@dataclass
class CaptureInfo:
    version: int
    sample_rate: float
    center_freq: float
    sample_count: int


def parse_capture(raw: bytes) -> tuple[CaptureInfo, SampleBuffer]:
    if len(raw) < 8 or raw[:8] != CAPTURE_MAGIC:
        raise BadMagicError(f"bad capture magic {raw[:8]!r}", offset=0)
    if len(raw) < HEADER_SIZE:
        raise TruncatedPayloadError(f"capture header needs {HEADER_SIZE} bytes, file has {len(raw)}", offset=len(raw))
    _, version, rate, center, count = _HEADER.unpack_from(raw)
    if version != CAPTURE_VERSION:
        raise VersionMismatchError(f"capture version {version} unsupported (expected {CAPTURE_VERSION})", offset=8)
    need = HEADER_SIZE + 8 * count
    if len(raw) < need:
        raise TruncatedPayloadError(f"capture declares {count} samples ({need} bytes) but holds {len(raw)} bytes", offset=len(raw))
    if len(raw) > need:
        raise CaptureError(f"capture has {len(raw) - need} trailing bytes after {count} samples", offset=need)
    if not rate > 0:
        raise CaptureError(f"capture sample rate must be positive, got {rate}", offset=12)
    iq = np.frombuffer(raw, dtype="<f4", count=2 * count, offset=HEADER_SIZE)
    samples = iq[0::2].astype(np.complex128) + 1j * iq[1::2].astype(np.float64)
    return CaptureInfo(version, rate, center, count), SampleBuffer(samples, rate)


def capture_read(path) -> SampleBuffer:
    return parse_capture(Path(path).read_bytes())[1]


def capture_info(path) -> tuple[CaptureInfo, SampleBuffer]:
    return parse_capture(Path(path).read_bytes())
