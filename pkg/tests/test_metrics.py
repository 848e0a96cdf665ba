import math
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from wimax60.dsp import RandomSource, SampleBuffer
from wimax60.errors import BadMagicError, CaptureError, GeometryError, TruncatedPayloadError, VersionMismatchError
from wimax60.metrics import (
    HEADER_SIZE,
    LinkReport,
    ber_count,
    capture_bytes,
    capture_info,
    capture_read,
    capture_write,
    evm_rms,
    parse_capture,
    qpsk_ber_theory,
    qpsk_ebn0_for_ber,
    symbol_errors,
)
from wimax60.ofdm import qpsk_demap, qpsk_map

FIXTURES = Path(__file__).parent / "fixtures"


def q_by_quadrature(x):
    val, _ = integrate.quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), x, np.inf)
    return val


def read_hex_fixture(name):
    lines = (FIXTURES / name).read_text().splitlines()
    return bytes.fromhex("".join(ln for ln in lines if not ln.startswith("#")))


def test_ber_identical_and_complemented():
    b = RandomSource(1).bits(1000)
    assert ber_count(b, b).ber == 0.0
    assert ber_count(b, 1 - b).ber == 1.0
    with pytest.raises(GeometryError):
        ber_count(b, b[:-1])


def test_symbol_errors():
    tx = np.array([0, 0, 1, 1, 0, 1, 1, 0])
    rx = np.array([0, 1, 1, 1, 1, 0, 1, 0])
    assert symbol_errors(tx, rx) == (4, 2)


def test_theory_matches_quadrature():
    for db in (0.0, 4.0, 6.8, 10.0):
        ebn0 = 10 ** (db / 10)
        assert qpsk_ber_theory(db) == pytest.approx(q_by_quadrature(math.sqrt(2 * ebn0)), rel=1e-9)
    assert qpsk_ebn0_for_ber(qpsk_ber_theory(5.5)) == pytest.approx(5.5, abs=1e-9)


def test_qpsk_awgn_ber_at_6_8_db():
    ebn0 = 10 ** (6.8 / 10)
    n_sym = 5 * 10**6
    rs = RandomSource(2)
    bits = rs.bits(2 * n_sym)
    # unit-energy symbols carry 2 bits, so N0 = 1 / (2 Eb/N0)
    rx = qpsk_map(bits) + rs.complex_normal(n_sym, 1 / (2 * ebn0))
    ber = ber_count(bits, qpsk_demap(rx)).ber
    theory = q_by_quadrature(math.sqrt(2 * ebn0))
    assert theory == pytest.approx(1.0e-3, rel=0.1)
    assert abs(ber - theory) / theory < 0.15


def test_evm_cases():
    r = qpsk_map(RandomSource(3).bits(2000))
    assert evm_rms(r, r) == 0.0
    assert evm_rms(r * 1.03, r) == pytest.approx(3.0, rel=1e-9)
    sigma = 0.1
    big = np.tile(r, 100)
    noisy = big + RandomSource(4).complex_normal(big.size, sigma**2)
    assert evm_rms(noisy, big) == pytest.approx(100 * sigma, rel=0.02)
    with pytest.raises(GeometryError):
        evm_rms(r, r[:-1])
    with pytest.raises(GeometryError):
        evm_rms([1.0], [0.0])


def test_report_consistency_and_text():
    rep = LinkReport(bits_compared=200, bit_errors=3, symbols_compared=100, symbol_errors=3, ebn0_db=4.0)
    rep.check_consistency()
    assert rep.ber == 0.015 and rep.ser == 0.03
    text = rep.to_text()
    assert "ber = 0.015\n" in text and "ebn0_db = 4.0\n" in text
    assert rep.csv_row().startswith("4.0,200,3,0.015,0.03,")
    bad = LinkReport(bits_compared=200, bit_errors=3, symbols_compared=100, symbol_errors=7)
    with pytest.raises(AssertionError):
        bad.check_consistency()
    with pytest.raises(GeometryError):
        LinkReport(bits_compared=2, bit_errors=3)


def test_report_text_has_no_numpy_reprs():
    rep = LinkReport(bits_compared=10, evm_rms=np.float64(1.5), noise_variance=np.float64(0.25))
    assert "np." not in rep.to_text()


def test_capture_round_trip_1e5(tmp_path):
    rs = RandomSource(5)
    x = rs.complex_normal(10**5).astype(np.complex64).astype(np.complex128)
    buf = SampleBuffer(x, 2.24e6)
    path = tmp_path / "a.iq"
    capture_write(buf, path, center_freq=60e9)
    back = capture_read(path)
    assert np.array_equal(back.samples, x)
    assert back.sample_rate == 2.24e6
    info, _ = capture_info(path)
    assert info.center_freq == 60e9 and info.sample_count == 10**5 and info.version == 1


def test_capture_hex_fixture():
    raw = read_hex_fixture("capture_one_sample.hex")
    assert len(raw) == HEADER_SIZE + 8 == 44
    info, buf = parse_capture(raw)
    assert info.sample_rate == 2.0**20 and info.sample_count == 1
    assert buf.samples[0] == 1.0 - 0.5j
    assert capture_bytes(SampleBuffer([1.0 - 0.5j], 2.0**20)) == raw


def test_capture_truncated():
    raw = capture_bytes(SampleBuffer(np.ones(10), 1e6))
    with pytest.raises(TruncatedPayloadError):
        parse_capture(raw[:-3])
    with pytest.raises(TruncatedPayloadError):
        parse_capture(raw[:20])
    with pytest.raises(CaptureError):
        parse_capture(raw + b"\x00")


def test_capture_bad_magic_and_version():
    raw = bytearray(capture_bytes(SampleBuffer(np.ones(2), 1e6)))
    bad = bytes(raw)
    with pytest.raises(BadMagicError) as exc:
        parse_capture(b"IQCAQ" + bad[5:])
    assert exc.value.offset == 0
    raw[8] = 2
    with pytest.raises(VersionMismatchError):
        parse_capture(bytes(raw))


def test_capture_rejects_bad_rate():
    raw = bytearray(capture_bytes(SampleBuffer(np.ones(2), 1e6)))
    raw[12:20] = bytes(8)
    with pytest.raises(CaptureError):
        parse_capture(bytes(raw))
