"""Tapped-delay-line WSSUS fading channel, AWGN, and the per-subcarrier response.

Each tap l has a delay, a mean power and a maximum Doppler shift. Its gain
h_l(t) is a zero-mean complex Gaussian process with autocorrelation
``power * J0(2 pi f_D dt)`` (Jakes spectrum); distinct taps are independent.

Fading generation
-----------------
White complex Gaussian noise is filtered by a symmetric FIR whose
autocorrelation approximates J0. The FIR is designed by spectral
factorization: the target autocorrelation is Hann-windowed over
``FIR_PERIODS`` Doppler periods, transformed, clipped at zero, square-rooted
and transformed back. With 8 periods the RMS autocorrelation error over
lags up to half a Doppler period is about 1.5e-3 (relative to tap power).

The process is generated on a coarse grid of about ``OVERSAMPLE`` points per
Doppler period and linearly interpolated to the sample rate. Linear
interpolation lowers the mean power by roughly (1 - J0(2 pi / OVERSAMPLE)) / 3,
below 0.2% at 64 points per period.

Noise calibration
-----------------
``noise_variance`` is the variance of the complex noise added to every
sample. With the unnormalized receive FFT a unit-energy symbol on a data
subcarrier comes out with energy 1 while the noise on every bin has variance
``n_fft * noise_variance``. Hence, referenced to the demodulator output,

    Es/N0 = 1 / (n_fft * noise_variance),   Eb/N0 = Es/N0 / bits_per_symbol.

Referenced to the transmitted waveform instead (counting pilot energy and
the cyclic prefix as overhead), Eb grows by ``(n_fft + G)/n_fft *
(n_data + n_pilots)/n_data``; see :func:`noise_variance_for_ebn0`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal, special

from .dsp import RandomSource, SampleBuffer
from .errors import GeometryError, ProfileError
from .ofdm import FrameConfig

OVERSAMPLE = 64
FIR_PERIODS = 8
OFFGRID_TOLERANCE = 0.01


@dataclass(frozen=True)
class Tap:
    delay: float  # seconds
    power: float  # linear
    doppler: float = 0.0  # Hz
    fading: bool = True  # False: deterministic gain sqrt(power), no Rayleigh draw


@dataclass(frozen=True)
class ChannelProfile:
    taps: tuple[Tap, ...]
    noise_variance: float = 0.0

    def __post_init__(self):
        taps = tuple(t if isinstance(t, Tap) else Tap(*t) for t in self.taps)
        object.__setattr__(self, "taps", taps)
        if not taps:
            raise ProfileError("a channel profile needs at least one tap")
        for t in taps:
            if not (t.delay >= 0 and math.isfinite(t.delay)):
                raise ProfileError(f"tap delay must be non-negative, got {t.delay}")
            if not (t.power > 0 and math.isfinite(t.power)):
                raise ProfileError(f"tap power must be positive, got {t.power}")
            if not (t.doppler >= 0 and math.isfinite(t.doppler)):
                raise ProfileError(f"Doppler must be non-negative, got {t.doppler}")
        delays = [t.delay for t in taps]
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ProfileError("tap delays must be strictly increasing")
        if not (self.noise_variance >= 0 and math.isfinite(self.noise_variance)):
            raise ProfileError(f"noise variance must be non-negative, got {self.noise_variance}")
        total = sum(t.power for t in taps)
        if abs(total - 1.0) > 1e-3:
            warnings.warn(f"channel profile power sums to {total:.6g}, not 1", stacklevel=3)

    @classmethod
    def identity(cls, noise_variance: float = 0.0) -> "ChannelProfile":
        return cls((Tap(0.0, 1.0, 0.0, fading=False),), noise_variance)

    @classmethod
    def from_samples(cls, delays, powers, dopplers=None, sample_rate: float = 2.24e6, noise_variance: float = 0.0, fading: bool = True):
        """Profile with delays given in whole samples."""
        dopplers = dopplers if dopplers is not None else [0.0] * len(delays)
        taps = tuple(Tap(d / sample_rate, float(p), float(f), fading) for d, p, f in zip(delays, powers, dopplers))
        return cls(taps, noise_variance)

    @property
    def n_taps(self) -> int:
        return len(self.taps)

    @property
    def max_delay(self) -> float:
        return self.taps[-1].delay

    @property
    def powers(self) -> np.ndarray:
        return np.array([t.power for t in self.taps])

    def normalized(self) -> "ChannelProfile":
        total = float(np.sum(self.powers))
        return ChannelProfile(tuple(Tap(t.delay, t.power / total, t.doppler, t.fading) for t in self.taps), self.noise_variance)

    def with_noise(self, noise_variance: float) -> "ChannelProfile":
        return ChannelProfile(self.taps, noise_variance)

    def delay_samples(self, sample_rate: float) -> np.ndarray:
        """Tap delays rounded to the sample grid; warns when a delay is off-grid by > 1%."""
        exact = np.array([t.delay for t in self.taps]) * sample_rate
        d = np.rint(exact).astype(np.int64)
        off = np.abs(exact - d)
        if np.any(off > OFFGRID_TOLERANCE):
            warnings.warn(
                f"tap delays off the sample grid by up to {off.max():.3f} samples; rounding",
                stacklevel=2,
            )
        if len(set(d.tolist())) != d.size:
            raise ProfileError("two taps round to the same sample delay")
        return d

    def is_static(self) -> bool:
        return all(t.doppler == 0.0 or not t.fading for t in self.taps)

    # key = value text form
    def to_text(self) -> str:
        lines = ["# tap = delay_ns,power_db,doppler_hz[,rayleigh|fixed]"]
        for t in self.taps:
            kind = "rayleigh" if t.fading else "fixed"
            lines.append(f"tap = {t.delay * 1e9!r},{10 * math.log10(t.power)!r},{t.doppler!r},{kind}")
        lines.append(f"noise_variance = {self.noise_variance!r}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "ChannelProfile":
        taps = []
        noise = 0.0
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ProfileError(_where(source, lineno) + f"expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                if key == "tap":
                    fields = [v.strip() for v in value.split(",")]
                    kind = "rayleigh"
                    if fields and fields[-1] in ("rayleigh", "fixed"):
                        kind = fields.pop()
                    parts = [float(v) for v in fields]
                    if len(parts) not in (2, 3):
                        raise ValueError("tap needs delay_ns,power_db[,doppler_hz][,rayleigh|fixed]")
                    delay_ns, power_db = parts[:2]
                    doppler = parts[2] if len(parts) == 3 else 0.0
                    taps.append(Tap(delay_ns * 1e-9, 10.0 ** (power_db / 10.0), doppler, kind == "rayleigh"))
                elif key == "noise_variance":
                    noise = float(value)
                else:
                    raise ValueError(f"unknown key {key!r}")
            except ValueError as exc:
                raise ProfileError(_where(source, lineno) + str(exc)) from exc
        try:
            return cls(tuple(taps), noise)
        except ProfileError as exc:
            raise ProfileError(_where(source, None) + str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ChannelProfile":
        return cls.from_text(Path(path).read_text(), str(path))


def _where(source, lineno) -> str:
    if source and lineno:
        return f"{source}:{lineno}: "
    if lineno:
        return f"line {lineno}: "
    if source:
        return f"{source}: "
    return ""


@dataclass
class TapState:
    """Per-tap complex gains, shape (n_taps, n_samples), on the channel sample grid.

    Rows of static taps may be read-only broadcast views.
    """

    gains: np.ndarray
    sample_rate: float

    @property
    def n_samples(self) -> int:
        return self.gains.shape[1]

    def at(self, index) -> np.ndarray:
        """Gains at sample indices; shape (n_taps,) or (n_taps, len(index))."""
        idx = np.asarray(index)
        if np.any(idx < 0) or np.any(idx >= self.n_samples):
            raise GeometryError("trajectory does not cover the requested sample instants")
        return self.gains[:, idx]

    @classmethod
    def static(cls, gains, n_samples: int, sample_rate: float) -> "TapState":
        g = np.asarray(gains, dtype=np.complex128).reshape(-1, 1)
        return cls(np.broadcast_to(g, (g.shape[0], n_samples)), sample_rate)


def jakes_fir(points_per_period: float, periods: int = FIR_PERIODS) -> np.ndarray:
    """Unit-energy FIR whose autocorrelation approximates J0(2 pi n / points_per_period)."""
    if points_per_period <= 2:
        raise GeometryError("need more than two samples per Doppler period")
    half = max(4, int(math.ceil(periods * points_per_period)))
    nfft = 1 << int(math.ceil(math.log2(8 * half + 1)))
    lags = np.arange(-half, half + 1)
    target = special.j0(2 * np.pi * lags / points_per_period) * signal.get_window("hann", 2 * half + 1, fftbins=False)
    r = np.zeros(nfft)
    r[lags % nfft] = target
    spectrum = np.maximum(np.fft.fft(r).real, 0.0)
    g = np.fft.fftshift(np.fft.ifft(np.sqrt(spectrum)).real)
    c = nfft // 2
    g = g[c - 2 * half : c + 2 * half + 1]
    return g / math.sqrt(float(np.sum(g * g)))


def _fading_row(tap: Tap, n_samples: int, sample_rate: float, rng: RandomSource) -> np.ndarray:
    power, doppler = tap.power, tap.doppler
    if not tap.fading:
        return np.broadcast_to(np.complex128(math.sqrt(power)), (n_samples,))
    if doppler == 0.0:
        return np.broadcast_to(rng.complex_normal(1, power), (n_samples,))
    decim = max(1, int(sample_rate / (OVERSAMPLE * doppler)))
    coarse_rate = sample_rate / decim
    fir = jakes_fir(coarse_rate / doppler)
    n_coarse = (n_samples - 1) // decim + 2
    white = rng.complex_normal(n_coarse + fir.size - 1, power)
    coarse = signal.oaconvolve(white, fir, mode="valid") if white.size > 4 * fir.size else np.convolve(white, fir, mode="valid")
    if decim == 1:
        return coarse[:n_samples]
    t = np.arange(n_samples) / decim
    tc = np.arange(n_coarse)
    return np.interp(t, tc, coarse.real) + 1j * np.interp(t, tc, coarse.imag)


def fading_process(profile: ChannelProfile, n_samples: int, rng: RandomSource, sample_rate: float = 2.24e6) -> TapState:
    """Independent Jakes-faded gain trajectories, one row per tap.

    A Rayleigh tap with zero Doppler draws one gain and holds it; a fixed tap
    has gain ``sqrt(power)`` and consumes no random draws.
    """
    if n_samples < 1:
        raise GeometryError("trajectory needs at least one sample")
    rows = [_fading_row(t, n_samples, sample_rate, rng) for t in profile.taps]
    if profile.is_static():
        g = np.array([r[0] for r in rows])
        return TapState.static(g, n_samples, sample_rate)
    return TapState(np.vstack([np.asarray(r) for r in rows]), sample_rate)


def channel_apply(
    tx: SampleBuffer,
    profile: ChannelProfile,
    trajectory: TapState,
    rng: RandomSource | None = None,
    noise_variance: float | None = None,
) -> SampleBuffer:
    """r[n] = sum_l h_l[n] tx[n - d_l] + noise[n]; output is len(tx) + max delay long."""
    delays = profile.delay_samples(tx.sample_rate)
    n_in = len(tx)
    dmax = int(delays[-1])
    if dmax > n_in:
        raise GeometryError(f"maximum delay of {dmax} samples exceeds the {n_in}-sample buffer")
    n_out = n_in + dmax
    if trajectory.gains.shape[0] != profile.n_taps:
        raise GeometryError("trajectory and profile disagree on the tap count")
    if trajectory.n_samples < n_out:
        raise GeometryError(f"trajectory covers {trajectory.n_samples} samples, need {n_out}")
    x = tx.samples
    out = np.zeros(n_out, dtype=np.complex128)
    for l, d in enumerate(delays.tolist()):
        row = trajectory.gains[l]
        if row.strides[0] == 0:
            out[d : d + n_in] += row[0] * x
        else:
            out[d : d + n_in] += row[d : d + n_in] * x
    var = profile.noise_variance if noise_variance is None else noise_variance
    if var > 0:
        if rng is None:
            raise GeometryError("a RandomSource is required when noise is enabled")
        out += rng.complex_normal(n_out, var)
    return SampleBuffer(out, tx.sample_rate)


@dataclass(frozen=True)
class ChannelResponse:
    H: np.ndarray  # (K, n_fft) in FFT-bin order
    sample_instants: np.ndarray = field(default=None, repr=False)


def symbol_instants(cfg: FrameConfig, n_symbols: int, first_symbol: int = 0) -> np.ndarray:
    """Sample index of the first body sample (after the prefix) of each symbol."""
    k = np.arange(first_symbol, first_symbol + n_symbols)
    return k * cfg.symbol_len + cfg.guard_len


def effective_channel(profile: ChannelProfile, trajectory: TapState, cfg: FrameConfig, n_symbols: int, first_symbol: int = 0) -> ChannelResponse:
    """H[k, q] = sum_l h_l(kT) exp(-j 2 pi q tau_l / T), quasi-static per symbol.

    ``q`` is the FFT bin. Delays are taken on the sample grid, as in
    :func:`channel_apply`.
    """
    d = profile.delay_samples(cfg.sample_rate)
    inst = symbol_instants(cfg, n_symbols, first_symbol)
    h = trajectory.at(inst).T  # (K, L)
    q = np.arange(cfg.n_fft)
    steer = np.exp(-2j * np.pi * np.outer(d, q) / cfg.n_fft)  # (L, N)
    return ChannelResponse(h @ steer, inst)


def noise_variance_for_ebn0(
    ebn0_db: float,
    cfg: FrameConfig,
    bits_per_symbol: int = 2,
    count_overhead: bool = False,
) -> float:
    """Per-sample complex noise variance giving the requested Eb/N0.

    With ``count_overhead`` false, Eb/N0 is referenced to a data subcarrier at
    the demodulator output: ``var = 1 / (n_fft * bits_per_symbol * ebn0)``.
    With it true, Eb is the transmitted energy per data bit including the
    cyclic prefix and pilot power:
    ``var = (n_fft + G) * (n_data + n_pilots) / (n_fft**2 * bits_per_symbol * n_data * ebn0)``.
    """
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    n = cfg.n_fft
    if not count_overhead:
        return 1.0 / (n * bits_per_symbol * ebn0)
    return (n + cfg.guard_len) * (cfg.n_data + cfg.n_pilots) / (n * n * bits_per_symbol * cfg.n_data * ebn0)


def noise_variance_for_snr(snr_db: float, cfg: FrameConfig) -> float:
    """Per-sample noise variance for a given time-domain SNR of the OFDM waveform."""
    signal_power = (cfg.n_data + cfg.n_pilots) / cfg.n_fft**2
    return signal_power / 10.0 ** (snr_db / 10.0)
