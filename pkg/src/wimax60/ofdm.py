"""QPSK mapping, subcarrier packing, IFFT/cyclic-prefix synthesis and the FFT receiver.

Subcarriers are addressed two ways. *Logical* indices run from -n_fft/2 to
n_fft/2 - 1 with DC at 0; *bins* are FFT positions 0..n_fft-1
(``bin = logical mod n_fft``). Grids (``DemodOutput.s`` and friends) are
stored in bin order so that they line up with the FFT directly.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .dsp import DEFAULT_SAMPLE_RATE, SampleBuffer, fft, is_power_of_two
from .errors import GeometryError, TruncatedStreamError
from .spreading import PnGenerator

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

PILOTS_256 = (-88, -63, -38, -13, 13, 38, 63, 88)


def _spread_pilots(half: int, n_pilots: int) -> tuple[int, ...]:
    """Evenly spread pilots over -half..half (excluding DC); used for non-256 layouts."""
    if n_pilots % 2:
        raise GeometryError("pilot count must be even for the symmetric layout")
    per_side = n_pilots // 2
    step = half / per_side
    pos = sorted({max(1, int(round(step * (i + 0.5)))) for i in range(per_side)})
    if len(pos) != per_side:
        raise GeometryError("too many pilots for the used band")
    return tuple([-p for p in reversed(pos)] + pos)


@dataclass(frozen=True)
class FrameConfig:
    n_fft: int = 256
    n_data: int = 192
    n_pilots: int = 8
    pilot_indices: tuple[int, ...] | None = None
    guard_len: int = 64
    sample_rate: float = DEFAULT_SAMPLE_RATE
    pilot_mode: str = "fixed"

    def __post_init__(self):
        if not is_power_of_two(self.n_fft):
            raise GeometryError(f"n_fft must be a power of two, got {self.n_fft}")
        used = self.n_data + self.n_pilots
        if used % 2 or used >= self.n_fft:
            raise GeometryError(f"n_data + n_pilots = {used} must be even and below n_fft = {self.n_fft}")
        if not 0 <= self.guard_len < self.n_fft:
            raise GeometryError(f"guard length must be in [0, n_fft), got {self.guard_len}")
        if self.sample_rate <= 0:
            raise GeometryError("sample_rate must be positive")
        if self.pilot_mode not in ("fixed", "prbs"):
            raise GeometryError(f"pilot_mode must be 'fixed' or 'prbs', got {self.pilot_mode!r}")
        half = used // 2
        if self.pilot_indices is None:
            pilots = PILOTS_256 if (self.n_fft == 256 and self.n_pilots == 8 and half == 100) else _spread_pilots(half, self.n_pilots)
            object.__setattr__(self, "pilot_indices", tuple(pilots))
        else:
            object.__setattr__(self, "pilot_indices", tuple(int(p) for p in self.pilot_indices))
        p = self.pilot_indices
        if len(p) != self.n_pilots or len(set(p)) != len(p):
            raise GeometryError(f"expected {self.n_pilots} distinct pilot indices, got {p}")
        if 0 in p or any(abs(i) > half for i in p):
            raise GeometryError(f"pilot indices must lie in the used band +-{half} and avoid DC")

    @property
    def used_half(self) -> int:
        return (self.n_data + self.n_pilots) // 2

    @property
    def symbol_len(self) -> int:
        return self.n_fft + self.guard_len

    @property
    def symbol_time(self) -> float:
        """Useful symbol duration T (s), without the guard."""
        return self.n_fft / self.sample_rate

    @property
    def subcarrier_spacing(self) -> float:
        return self.sample_rate / self.n_fft

    @property
    def null_count(self) -> int:
        return self.n_fft - self.n_data - self.n_pilots

    @cached_property
    def used_logical(self) -> np.ndarray:
        h = self.used_half
        return np.array([i for i in range(-h, h + 1) if i != 0])

    @cached_property
    def data_logical(self) -> np.ndarray:
        pilots = set(self.pilot_indices)
        return np.array([i for i in self.used_logical if i not in pilots])

    @cached_property
    def pilot_logical(self) -> np.ndarray:
        return np.array(sorted(self.pilot_indices))

    @cached_property
    def data_bins(self) -> np.ndarray:
        return self.data_logical % self.n_fft

    @cached_property
    def pilot_bins(self) -> np.ndarray:
        return self.pilot_logical % self.n_fft

    def pilot_values(self, n_symbols: int, start: int = 0) -> np.ndarray:
        """Known pilot symbols, shape (n_symbols, n_pilots), in increasing logical order.

        ``fixed`` puts +1 on every pilot; ``prbs`` flips the sign of all pilots of
        symbol k by ``w_k`` from an x^11 + x^9 + 1 register seeded all-ones.
        """
        if self.pilot_mode == "fixed":
            return np.ones((n_symbols, self.n_pilots), dtype=np.complex128)
        gen = PnGenerator(taps=(11, 9), degree=11)
        w = gen.next(start + n_symbols)[start:]
        sign = 1.0 - 2.0 * w.astype(float)
        return np.repeat(sign[:, None], self.n_pilots, axis=1).astype(np.complex128)


def qpsk_map(bits) -> np.ndarray:
    """Gray QPSK: (b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)."""
    b = np.asarray(bits, dtype=np.int8).reshape(-1)
    if b.size % 2:
        raise GeometryError(f"QPSK needs an even number of bits, got {b.size}")
    pairs = b.reshape(-1, 2)
    return ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1])) * _INV_SQRT2


def qpsk_demap(symbols) -> np.ndarray:
    """Hard quadrant decision; a zero real or imaginary part decodes as bit 0."""
    s = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    out = np.empty((s.size, 2), dtype=np.uint8)
    out[:, 0] = s.real < 0
    out[:, 1] = s.imag < 0
    return out.reshape(-1)


def pack_subcarriers(data, cfg: FrameConfig, k: int = 0) -> np.ndarray:
    """Place ``n_data`` symbols and the pilots of symbol ``k`` into an FFT-ordered vector."""
    d = np.asarray(data, dtype=np.complex128).reshape(-1)
    if d.size != cfg.n_data:
        raise GeometryError(f"expected {cfg.n_data} data symbols, got {d.size}")
    return pack_grid(d[None, :], cfg, first_symbol=k)[0]


def pack_grid(data: np.ndarray, cfg: FrameConfig, first_symbol: int = 0) -> np.ndarray:
    """Batch form of :func:`pack_subcarriers`: (K, n_data) -> (K, n_fft)."""
    d = np.asarray(data, dtype=np.complex128)
    if d.ndim != 2 or d.shape[1] != cfg.n_data:
        raise GeometryError(f"expected shape (K, {cfg.n_data}), got {d.shape}")
    grid = np.zeros((d.shape[0], cfg.n_fft), dtype=np.complex128)
    grid[:, cfg.data_bins] = d
    grid[:, cfg.pilot_bins] = cfg.pilot_values(d.shape[0], first_symbol)
    return grid


def unpack_subcarriers(grid, cfg: FrameConfig) -> np.ndarray:
    """Data symbols in increasing logical order; works on one vector or a (K, n_fft) grid."""
    g = np.asarray(grid)
    if g.shape[-1] != cfg.n_fft:
        raise GeometryError(f"expected last dimension {cfg.n_fft}, got {g.shape[-1]}")
    return g[..., cfg.data_bins]


@dataclass(frozen=True)
class OfdmSymbol:
    freq_bins: np.ndarray
    time_samples: np.ndarray
    symbol_index: int = 0


def ofdm_modulate(packed, cfg: FrameConfig, k: int = 0) -> OfdmSymbol:
    """IFFT one packed vector and prepend the last ``guard_len`` samples."""
    x = np.asarray(packed, dtype=np.complex128).reshape(-1)
    if x.size != cfg.n_fft:
        raise GeometryError(f"expected {cfg.n_fft} bins, got {x.size}")
    return OfdmSymbol(x.copy(), modulate_grid(x[None, :], cfg)[0], k)


def modulate_grid(grid: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """(K, n_fft) frequency grid -> (K, n_fft + G) time samples with cyclic prefix."""
    body = fft(grid, inverse=True)
    g = cfg.guard_len
    return np.concatenate([body[:, cfg.n_fft - g :], body], axis=1)


def to_buffer(symbols, cfg: FrameConfig) -> SampleBuffer:
    """Concatenate OFDM symbols (or a (K, n_fft + G) sample array) into one stream."""
    if isinstance(symbols, np.ndarray):
        return SampleBuffer(symbols.reshape(-1), cfg.sample_rate)
    return SampleBuffer(np.concatenate([s.time_samples for s in symbols]), cfg.sample_rate)


@dataclass
class DemodOutput:
    """Receiver grid ``s[k, bin]`` with optional reference symbols and channel response."""

    s: np.ndarray
    c: np.ndarray | None = None
    h_used: np.ndarray | None = None
    first_symbol: int = 0

    def __post_init__(self):
        for name in ("c", "h_used"):
            v = getattr(self, name)
            if v is not None and np.shape(v) != self.s.shape:
                raise GeometryError(f"{name} shape {np.shape(v)} does not match s {self.s.shape}")

    @property
    def n_symbols(self) -> int:
        return self.s.shape[0]

    def to_csv(self, path=None, cfg: FrameConfig | None = None) -> str:
        """Rows ``k,q,re_s,im_s,re_c,im_c``; with ``cfg`` only used subcarriers are written.

        ``q`` is the FFT bin index.
        """
        out = io.StringIO()
        out.write("k,q,re_s,im_s,re_c,im_c\n")
        bins = np.arange(self.s.shape[1]) if cfg is None else np.sort(np.concatenate([cfg.data_bins, cfg.pilot_bins]))
        c = self.c if self.c is not None else np.zeros_like(self.s)
        for k in range(self.s.shape[0]):
            for q in bins.tolist():
                sv, cv = complex(self.s[k, q]), complex(c[k, q])
                out.write(f"{k + self.first_symbol},{q},{sv.real!r},{sv.imag!r},{cv.real!r},{cv.imag!r}\n")
        text = out.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def demodulate_samples(samples: np.ndarray, cfg: FrameConfig, n_symbols: int, start: int = 0) -> np.ndarray:
    """Strip the prefix of each symbol and FFT the body; returns (n_symbols, n_fft)."""
    need = start + n_symbols * cfg.symbol_len
    if samples.size < need:
        raise TruncatedStreamError(f"need {need} samples for {n_symbols} symbols, have {samples.size}")
    blocks = samples[start:need].reshape(n_symbols, cfg.symbol_len)
    return fft(blocks[:, cfg.guard_len :])


def ofdm_demodulate(
    received: SampleBuffer,
    cfg: FrameConfig,
    n_symbols: int,
    reference: np.ndarray | None = None,
    h_used: np.ndarray | None = None,
) -> DemodOutput:
    """Ideal-timing receiver: frame start is sample 0 of ``received``."""
    s = demodulate_samples(received.samples, cfg, n_symbols)
    return DemodOutput(s, reference, h_used)
