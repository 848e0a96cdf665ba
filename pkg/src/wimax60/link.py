"""End-to-end link: MAC PDUs -> PN spreading -> QPSK -> OFDM -> channel -> receiver.

Stream geometry
---------------
The serialized PDU bit stream is cut into ``data_bits_per_frame`` pieces;
each piece is PN-spread into a ``frame_len``-chip frame whose tail is zero.
All chip frames are concatenated and QPSK-mapped, giving ``frame_len / 2``
symbols per frame. That symbol stream is packed ``n_data`` symbols per OFDM
symbol; the last OFDM symbol is topped up with the QPSK point for bits
(0, 0). With the defaults (288 chips, 192 data subcarriers) four chip frames
fill exactly three OFDM symbols.

The waveform is processed in blocks of ``chunk_symbols`` OFDM symbols to
bound memory. Each block gets its own fading realization and noise, so the
fading process restarts at block boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import chanest
from .channel import (
    ChannelProfile,
    ChannelResponse,
    channel_apply,
    effective_channel,
    fading_process,
    noise_variance_for_ebn0,
)
from .dsp import RandomSource, SampleBuffer, psd_estimate, SpectrumEstimate
from .errors import GeometryError, IntegrityError
from .mac import MacPdu, build_pdu, parse_pdu, serialize_pdu
from .metrics import LinkReport, evm_rms
from .ofdm import DemodOutput, FrameConfig, demodulate_samples, modulate_grid, pack_grid, qpsk_demap, qpsk_map
from .spreading import DEFAULT_CHIP_RATE, DEFAULT_FRAME_LEN, PnGenerator, despread_stream, spread_stream

# child-stream indices of the master RandomSource
_STREAM_PAYLOAD, _STREAM_FADING, _STREAM_NOISE = 0, 1, 2


@dataclass(frozen=True)
class LinkConfig:
    frame: FrameConfig = field(default_factory=FrameConfig)
    profile: ChannelProfile = field(default_factory=ChannelProfile.identity)
    frame_len: int = DEFAULT_FRAME_LEN
    data_bits_per_frame: int = 192
    chip_rate: float = DEFAULT_CHIP_RATE
    pn_degree: int = 15
    pn_taps: tuple[int, ...] = (15, 14)
    pn_seed: int = 0x7FFF
    payload_bytes: int = 1000
    cid: int = 0
    ht: int = 0
    ec: int = 0
    ptype: int = 0
    eks: int = 0
    ci: int = 1
    bits: int = 100_000
    estimator: str = "ls-linear"
    ebn0_reference: str = "demod"
    chunk_symbols: int = 1024
    capture_symbols: int = 64
    psd_segment: int = 1024

    def __post_init__(self):
        if self.data_bits_per_frame % 2 or not 0 < self.data_bits_per_frame <= self.frame_len:
            raise GeometryError("data_bits_per_frame must be even and within the chip frame")
        if self.frame_len % 2:
            raise GeometryError("frame_len must be even to map onto QPSK")
        if self.estimator not in chanest.METHODS:
            raise GeometryError(f"estimator must be one of {chanest.METHODS}")
        if self.ebn0_reference not in ("demod", "transmit"):
            raise GeometryError("ebn0_reference must be 'demod' or 'transmit'")
        if self.bits < 1 or self.payload_bytes < 0 or self.chunk_symbols < 1 or self.capture_symbols < 1:
            raise GeometryError("bits, chunk_symbols and capture_symbols must be positive")

    def pn(self) -> PnGenerator:
        return PnGenerator(self.pn_taps, self.pn_degree, self.pn_seed)


@dataclass
class LinkResult:
    report: LinkReport
    tx_bits: np.ndarray
    rx_bits: np.ndarray
    pdus: list[MacPdu]
    rx_pdus: list[MacPdu | None]
    tx_capture: SampleBuffer
    rx_capture: SampleBuffer
    spectrum: SpectrumEstimate
    constellation: DemodOutput
    estimate: chanest.ChannelEstimate
    truth: ChannelResponse


def make_pdus(cfg: LinkConfig, rng: RandomSource) -> list[MacPdu]:
    """Enough PDUs of random payload to carry at least ``cfg.bits`` payload bits."""
    per = cfg.payload_bytes * 8
    n = max(1, -(-cfg.bits // per)) if per else 1
    raw = rng.bits(n * per)
    pdus = []
    for i in range(n):
        payload = np.packbits(raw[i * per : (i + 1) * per]).tobytes()
        pdus.append(build_pdu(payload, cfg.cid, ht=cfg.ht, ec=cfg.ec, ptype=cfg.ptype, eks=cfg.eks, ci=cfg.ci))
    return pdus


def symbols_per_stream(cfg: LinkConfig, n_bits: int) -> tuple[int, int]:
    """(number of chip frames, number of OFDM symbols) needed for ``n_bits``."""
    n_frames = -(-n_bits // cfg.data_bits_per_frame)
    n_qpsk = n_frames * cfg.frame_len // 2
    return n_frames, -(-n_qpsk // cfg.frame.n_data)


def run_link(cfg: LinkConfig, seed: int, noise_variance: float | None = None, ebn0_db: float | None = None) -> LinkResult:
    """Run the whole chain once. Noise comes from ``ebn0_db`` if given, else
    ``noise_variance``, else the channel profile."""
    fc = cfg.frame
    master = RandomSource(seed)
    rng_payload = master.spawn(_STREAM_PAYLOAD)
    rng_fading = master.spawn(_STREAM_FADING)
    rng_noise = master.spawn(_STREAM_NOISE)

    if ebn0_db is not None:
        var = noise_variance_for_ebn0(ebn0_db, fc, 2, count_overhead=cfg.ebn0_reference == "transmit")
    elif noise_variance is not None:
        var = float(noise_variance)
    else:
        var = cfg.profile.noise_variance

    pdus = make_pdus(cfg, rng_payload)
    tx_bits = np.concatenate([serialize_pdu(p) for p in pdus])
    n_bits = tx_bits.size

    chips = spread_stream(tx_bits, cfg.pn(), cfg.data_bits_per_frame, cfg.frame_len)
    n_frames, n_ofdm = symbols_per_stream(cfg, n_bits)
    chip_stream = chips.reshape(-1)
    # payload mask over chips, then over QPSK symbols
    payload_chip = np.zeros((n_frames, cfg.frame_len), dtype=bool)
    payload_chip[:, : cfg.data_bits_per_frame] = True
    payload_chip.reshape(-1)[np.flatnonzero(payload_chip.reshape(-1))[n_bits:]] = False
    payload_chip = payload_chip.reshape(-1)

    n_qpsk = chip_stream.size // 2
    data = np.full(n_ofdm * fc.n_data, (1 + 1j) / np.sqrt(2.0))
    data[:n_qpsk] = qpsk_map(chip_stream)
    data = data.reshape(n_ofdm, fc.n_data)

    delays = cfg.profile.delay_samples(fc.sample_rate)
    dmax = int(delays[-1])
    rx_chip_soft = np.empty(n_ofdm * fc.n_data, dtype=np.complex128)
    erased = np.zeros(n_ofdm * fc.n_data, dtype=bool)
    tx_cap, rx_cap, const = [], [], None
    cap_left = cfg.capture_symbols

    for start in range(0, n_ofdm, cfg.chunk_symbols):
        K = min(cfg.chunk_symbols, n_ofdm - start)
        grid = pack_grid(data[start : start + K], fc, first_symbol=start)
        tx = SampleBuffer(modulate_grid(grid, fc).reshape(-1), fc.sample_rate)
        traj = fading_process(cfg.profile, len(tx) + dmax, rng_fading, fc.sample_rate)
        rx = channel_apply(tx, cfg.profile, traj, rng_noise, noise_variance=var)
        s = demodulate_samples(rx.samples, fc, K)
        truth = effective_channel(cfg.profile, traj, fc, K)
        demod = DemodOutput(s, grid, truth.H, first_symbol=start)
        est = chanest.estimate(demod, fc, cfg.estimator, truth)
        eq = chanest.equalize(demod, est, fc)
        rx_chip_soft[start * fc.n_data : (start + K) * fc.n_data] = eq.symbols.reshape(-1)
        erased[start * fc.n_data : (start + K) * fc.n_data] = eq.erasures.reshape(-1)
        if cap_left > 0:
            m = min(cap_left, K)
            tx_cap.append(tx.samples[: m * fc.symbol_len])
            rx_cap.append(rx.samples[: m * fc.symbol_len])
            if const is None:
                const = DemodOutput(s[:m], grid[:m], truth.H[:m])
                cap_est = chanest.ChannelEstimate(est.H_hat[:m], est.method)
                cap_truth = ChannelResponse(truth.H[:m], truth.sample_instants[:m])
            cap_left -= m
        if start == 0:
            spectrum = psd_estimate(tx, min(cfg.psd_segment, len(tx)))

    rx_chips = qpsk_demap(rx_chip_soft[:n_qpsk]).reshape(n_frames, cfg.frame_len)
    rx_bits = despread_stream(rx_chips, cfg.pn(), cfg.data_bits_per_frame, n_bits)

    bit_errors = int(np.count_nonzero(rx_bits != tx_bits))
    sym_payload = payload_chip[0::2] & payload_chip[1::2]
    tx_pairs = chip_stream.reshape(-1, 2)[sym_payload]
    rx_pairs = rx_chips.reshape(-1, 2)[sym_payload]
    sym_err = int(np.count_nonzero(np.any(tx_pairs != rx_pairs, axis=1)))
    ref = data.reshape(-1)[:n_qpsk][sym_payload]
    evm = evm_rms(rx_chip_soft[:n_qpsk][sym_payload], ref)

    rx_pdus: list[MacPdu | None] = []
    pos = 0
    for p in pdus:
        n = 8 * p.header.len
        try:
            rx_pdus.append(parse_pdu(rx_bits[pos : pos + n]))
        except (IntegrityError, GeometryError, ValueError):
            rx_pdus.append(None)
        pos += n
    pdus_ok = sum(1 for a, b in zip(pdus, rx_pdus) if b is not None and b == a)

    report = LinkReport(
        bits_compared=n_bits,
        bit_errors=bit_errors,
        symbols_compared=int(np.count_nonzero(sym_payload)),
        symbol_errors=sym_err,
        evm_rms=evm,
        erasures=int(np.count_nonzero(erased[:n_qpsk][sym_payload])),
        pdus_sent=len(pdus),
        pdus_ok=pdus_ok,
        seed=seed,
        ebn0_db=ebn0_db,
        noise_variance=var,
        estimator=cfg.estimator,
    )
    report.check_consistency()
    return LinkResult(
        report=report,
        tx_bits=tx_bits,
        rx_bits=rx_bits,
        pdus=pdus,
        rx_pdus=rx_pdus,
        tx_capture=SampleBuffer(np.concatenate(tx_cap), fc.sample_rate),
        rx_capture=SampleBuffer(np.concatenate(rx_cap), fc.sample_rate),
        spectrum=spectrum,
        constellation=const,
        estimate=cap_est,
        truth=cap_truth,
    )


def sweep_seed(seed: int, index: int) -> int:
    """Seed of sweep point ``index``, derived from the master seed."""
    return RandomSource(seed).spawn(1000 + index).seed
