"""Complex sample containers, FFT wrappers, spectral estimation and seeded randomness.

FFT convention used throughout the package: the forward transform is
unnormalized and the inverse carries the 1/N factor, so that the inverse
transform is the OFDM synthesis sum ``sum_m b_m exp(j 2 pi m n / N)`` scaled
by 1/N.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike
from scipy import signal

from .errors import GeometryError

#: Power (dB) reported for bins that carry no energy at all.
POWER_FLOOR_DB = -300.0
_FLOOR_LINEAR = 10.0 ** (POWER_FLOOR_DB / 10.0)

#: Default baseband sample rate. 256-point FFT gives 8.75 kHz subcarrier
#: spacing, so the 200 used subcarriers span 1.75 MHz.
DEFAULT_SAMPLE_RATE = 2.24e6


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SampleBuffer:
    """Complex baseband samples with their sample rate (Hz)."""

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise GeometryError(f"sample_rate must be positive, got {self.sample_rate}")
        arr = np.array(self.samples, dtype=np.complex128).reshape(-1)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    def __getitem__(self, idx):
        return self.samples[idx]

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def mean_power(self) -> float:
        if self.samples.size == 0:
            return 0.0
        return float(np.mean(np.abs(self.samples) ** 2))

    @classmethod
    def concat(cls, buffers: list["SampleBuffer"]) -> "SampleBuffer":
        if not buffers:
            raise GeometryError("nothing to concatenate")
        rates = {b.sample_rate for b in buffers}
        if len(rates) != 1:
            raise GeometryError(f"cannot concatenate buffers with sample rates {sorted(rates)}")
        return cls(np.concatenate([b.samples for b in buffers]), buffers[0].sample_rate)


def fft(buf: ArrayLike, inverse: bool = False) -> np.ndarray:
    """DFT along the last axis; unnormalized forward, 1/N on the inverse.

    Raises GeometryError unless the transform length is a power of two.
    """
    x = np.asarray(buf, dtype=np.complex128)
    n = x.shape[-1] if x.ndim else 0
    if not is_power_of_two(n):
        raise GeometryError(f"FFT length must be a power of two, got {n}")
    if inverse:
        return np.fft.ifft(x, axis=-1)
    return np.fft.fft(x, axis=-1)


def ifft(buf: ArrayLike) -> np.ndarray:
    return fft(buf, inverse=True)


@dataclass(frozen=True)
class SpectrumEstimate:
    """Power per frequency bin, in dB relative to unit (full-scale) power.

    The linear bin powers sum to the mean power of the analysed buffer.
    """

    bin_freqs: np.ndarray
    power_db: np.ndarray
    resolution_bw: float

    def __post_init__(self):
        f = np.asarray(self.bin_freqs, dtype=float)
        p = np.asarray(self.power_db, dtype=float)
        if f.shape != p.shape or f.ndim != 1:
            raise GeometryError("bin_freqs and power_db must be 1-D arrays of equal length")
        if f.size > 1:
            d = np.diff(f)
            if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
                raise GeometryError("bin_freqs must be strictly increasing and uniformly spaced")
        if not np.all(np.isfinite(p)):
            raise GeometryError("power values must be finite")
        object.__setattr__(self, "bin_freqs", f)
        object.__setattr__(self, "power_db", p)

    @property
    def bin_width(self) -> float:
        if self.bin_freqs.size < 2:
            raise GeometryError("single-bin spectrum has no bin width")
        return float(self.bin_freqs[1] - self.bin_freqs[0])

    def power_linear(self) -> np.ndarray:
        p = 10.0 ** (self.power_db / 10.0)
        p[self.power_db <= POWER_FLOOR_DB] = 0.0
        return p

    def total_power(self) -> float:
        return float(np.sum(self.power_linear()))

    def peak_freq(self) -> float:
        return float(self.bin_freqs[int(np.argmax(self.power_db))])

    def to_csv(self, path=None) -> str:
        out = io.StringIO()
        out.write("freq_hz,power_db\n")
        for f, p in zip(self.bin_freqs.tolist(), self.power_db.tolist()):
            out.write(f"{f!r},{p!r}\n")
        text = out.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, resolution_bw: float | None = None) -> "SpectrumEstimate":
        text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
        lines = text.strip().splitlines()
        if not lines or lines[0].strip() != "freq_hz,power_db":
            raise GeometryError("spectrum CSV must start with 'freq_hz,power_db'")
        rows = [tuple(float(v) for v in ln.split(",")) for ln in lines[1:] if ln.strip()]
        f = np.array([r[0] for r in rows])
        p = np.array([r[1] for r in rows])
        rbw = resolution_bw if resolution_bw is not None else (float(f[1] - f[0]) if f.size > 1 else 0.0)
        return cls(f, p, rbw)


def psd_estimate(
    buf: SampleBuffer,
    segment_len: int = 256,
    overlap: float = 0.5,
    window: str = "hann",
) -> SpectrumEstimate:
    """Averaged windowed periodogram (Welch) of a complex buffer.

    Bins are ordered from -fs/2 upwards. Each bin holds power (not density),
    so the bins sum to the mean power of the buffer up to estimation noise.
    """
    n = len(buf)
    if n == 0:
        raise GeometryError("cannot estimate the spectrum of an empty buffer")
    if segment_len < 2 or segment_len > n:
        raise GeometryError(f"segment_len must be in [2, {n}], got {segment_len}")
    if not 0.0 <= overlap < 1.0:
        raise GeometryError(f"overlap must be in [0, 1), got {overlap}")
    noverlap = int(round(overlap * segment_len))
    if noverlap >= segment_len:
        noverlap = segment_len - 1
    fs = buf.sample_rate
    freqs, pxx = signal.welch(
        buf.samples,
        fs=fs,
        window=window,
        nperseg=segment_len,
        noverlap=noverlap,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    df = fs / segment_len
    power = np.fft.fftshift(pxx) * df
    freqs = np.fft.fftshift(freqs)
    w = signal.get_window(window, segment_len)
    enbw = fs * float(np.sum(w**2)) / float(np.sum(w)) ** 2
    with np.errstate(divide="ignore"):
        power_db = np.where(power > _FLOOR_LINEAR, 10.0 * np.log10(np.maximum(power, _FLOOR_LINEAR)), POWER_FLOOR_DB)
    return SpectrumEstimate(freqs, power_db, enbw)


def occupied_bandwidth(spec: SpectrumEstimate, fraction: float = 0.99) -> float:
    """Width (Hz) of the narrowest contiguous run of bins holding ``fraction`` of the power.

    The width is measured between the centres of the first and last bins of
    the run, so a run of ``n`` bins is ``(n - 1)`` bin widths wide.
    """
    if not 0.0 < fraction < 1.0:
        raise GeometryError(f"fraction must be in (0, 1), got {fraction}")
    if spec.bin_freqs.size < 2:
        raise GeometryError("occupied bandwidth of a single-bin spectrum is undefined")
    p = spec.power_linear()
    total = float(np.sum(p))
    if total <= 0.0:
        raise GeometryError("spectrum carries no power")
    cs = np.concatenate([[0.0], np.cumsum(p)])
    target = fraction * total
    # for each start i, first end j (exclusive) with cs[j] - cs[i] >= target
    starts = np.arange(p.size)
    ends = np.searchsorted(cs, cs[starts] + target * (1.0 - 1e-12), side="left")
    ok = ends <= p.size
    if not np.any(ok):
        raise GeometryError("no span reaches the requested power fraction")
    widths = ends[ok] - 1 - starts[ok]
    return float(np.min(widths)) * spec.bin_width


@dataclass
class RandomSource:
    """Seeded generator: PCG64 raw 64-bit words plus a fixed set of transforms.

    Only ``random_raw`` of the PCG64 bit generator is used, whose output
    stream numpy guarantees across releases. Uniforms take the top 53 bits of
    each word; Gaussians use the Box-Muller transform on pairs of uniforms.
    A source is single-owner; use :meth:`spawn` for parallel trials.
    """

    seed: int
    algorithm_id: str = field(default="pcg64/box-muller-v1", init=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        self.seed = int(self.seed)
        self._bitgen = np.random.PCG64(np.random.SeedSequence(self.seed))

    def raw(self, n: int) -> np.ndarray:
        if n == 0:
            return np.zeros(0, dtype=np.uint64)
        return np.asarray(self._bitgen.random_raw(n), dtype=np.uint64)

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in [0, 1)."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def bits(self, n: int) -> np.ndarray:
        """``n`` independent fair bits as uint8, 64 per raw word, MSB first."""
        words = self.raw((n + 63) // 64)
        as_bytes = words.astype(">u8").view(np.uint8)
        return np.unpackbits(as_bytes)[:n]

    def normal(self, n: int) -> np.ndarray:
        """Standard normal draws."""
        m = (n + 1) // 2
        z = self._box_muller(m)
        return np.concatenate([z.real, z.imag])[:n] if n else np.zeros(0)

    def complex_normal(self, n: int, variance: float = 1.0) -> np.ndarray:
        """Circular complex Gaussian draws with E|z|^2 = variance."""
        return self._box_muller(n) * math.sqrt(variance / 2.0)

    def _box_muller(self, m: int) -> np.ndarray:
        u = self.uniform(2 * m)
        u1 = 1.0 - u[0::2]  # (0, 1]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        return r * np.exp(2j * np.pi * u2)

    def spawn(self, index: int) -> "RandomSource":
        """Independent child source; children of equal (seed, index) are identical."""
        child = np.random.SeedSequence([self.seed, int(index)]).generate_state(2, np.uint64)
        return RandomSource(int(child[0]))
