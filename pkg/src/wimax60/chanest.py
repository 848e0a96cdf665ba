"""Pilot-aided channel estimation and zero-forcing equalization."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelResponse
from .errors import GeometryError
from .ofdm import DemodOutput, FrameConfig

METHODS = ("genie", "ls-linear", "ls-hold")

#: Bins with |H_hat| below this are erased instead of divided.
CONDITIONING_FLOOR = 1e-6


@dataclass
class ChannelEstimate:
    H_hat: np.ndarray  # (K, n_fft), FFT-bin order
    method: str
    pilot_mse: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.method not in METHODS:
            raise GeometryError(f"unknown estimation method {self.method!r}")

    def to_csv(self, path=None, truth: ChannelResponse | None = None, bins=None) -> str:
        """Rows ``k,q,re_H,im_H`` (plus ``re_H_true,im_H_true`` when ``truth`` is given)."""
        out = io.StringIO()
        out.write("k,q,re_H,im_H" + (",re_H_true,im_H_true" if truth is not None else "") + "\n")
        qs = np.arange(self.H_hat.shape[1]) if bins is None else np.asarray(bins)
        for k in range(self.H_hat.shape[0]):
            for q in qs.tolist():
                h = complex(self.H_hat[k, q])
                row = f"{k},{q},{h.real!r},{h.imag!r}"
                if truth is not None:
                    t = complex(truth.H[k, q])
                    row += f",{t.real!r},{t.imag!r}"
                out.write(row + "\n")
        text = out.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def estimate_genie(truth: ChannelResponse) -> ChannelEstimate:
    return ChannelEstimate(np.array(truth.H, copy=True), "genie", np.zeros(truth.H.shape[0]))


def estimate_ls(
    demod: DemodOutput,
    cfg: FrameConfig,
    pilot_values: np.ndarray | None = None,
    method: str = "ls-linear",
) -> ChannelEstimate:
    """Least-squares estimate at the pilots, interpolated across frequency per symbol.

    ``ls-linear`` interpolates real and imaginary parts linearly between
    pilots in logical-index order and holds the outermost pilot value beyond
    the pilot span. ``ls-hold`` takes the nearest pilot. No smoothing across
    symbols. Only used subcarriers are filled; null bins are left at zero.
    """
    if method not in ("ls-linear", "ls-hold"):
        raise GeometryError(f"estimate_ls does not implement {method!r}")
    K = demod.n_symbols
    if pilot_values is None:
        pilot_values = cfg.pilot_values(K, demod.first_symbol)
    pv = np.asarray(pilot_values, dtype=np.complex128)
    if pv.shape != (K, cfg.n_pilots):
        raise GeometryError(f"pilot values must have shape {(K, cfg.n_pilots)}, got {pv.shape}")
    if np.any(np.abs(pv) == 0):
        raise ZeroDivisionError("pilot values must be nonzero")
    at_pilots = demod.s[:, cfg.pilot_bins] / pv  # (K, P)
    xp = cfg.pilot_logical.astype(float)
    used = cfg.used_logical
    H = np.zeros_like(demod.s)
    H[:, used % cfg.n_fft] = interpolate_pilots(at_pilots, used, xp, method)
    mse = np.zeros(K)
    if demod.h_used is not None:
        d = H[:, cfg.pilot_bins] - demod.h_used[:, cfg.pilot_bins]
        mse = np.mean(np.abs(d) ** 2, axis=1)
    return ChannelEstimate(H, method, mse)


def _interp_plan(targets, pilots, method: str):
    """Left pilot index and fractional offset for every target position."""
    targets = np.asarray(targets, dtype=float)
    pilots = np.asarray(pilots, dtype=float)
    if method == "ls-hold":
        return np.argmin(np.abs(targets[:, None] - pilots[None, :]), axis=1), np.zeros(targets.size)
    left = np.clip(np.searchsorted(pilots, targets, side="right") - 1, 0, pilots.size - 2)
    frac = (targets - pilots[left]) / (pilots[left + 1] - pilots[left])
    # hold beyond the outermost pilots
    below, above = targets <= pilots[0], targets >= pilots[-1]
    left = np.where(above, pilots.size - 1, left)
    frac = np.where(below | above, 0.0, frac)
    return left, frac


def interpolate_pilots(values: np.ndarray, targets, pilots, method: str = "ls-linear") -> np.ndarray:
    """Interpolate (K, P) pilot values to (K, len(targets)); y0 + t (y1 - y0) per segment."""
    left, frac = _interp_plan(targets, pilots, method)
    y0 = values[:, left]
    if method == "ls-hold" or values.shape[1] == 1:
        return y0
    right = np.minimum(left + 1, values.shape[1] - 1)
    return y0 + frac * (values[:, right] - y0)


def estimate(demod: DemodOutput, cfg: FrameConfig, method: str, truth: ChannelResponse | None = None) -> ChannelEstimate:
    if method == "genie":
        if truth is None:
            raise GeometryError("genie estimation needs the true channel response")
        return estimate_genie(truth)
    return estimate_ls(demod, cfg, method=method)


@dataclass
class Equalized:
    symbols: np.ndarray  # (K, n_data) in pack order
    erasures: np.ndarray  # bool mask, same shape

    @property
    def n_erasures(self) -> int:
        return int(np.count_nonzero(self.erasures))


def equalize(demod: DemodOutput, est: ChannelEstimate, cfg: FrameConfig, floor: float = CONDITIONING_FLOOR) -> Equalized:
    """Zero-forcing: s / H_hat on data subcarriers; bins with |H_hat| < floor become 0 and are flagged."""
    if est.H_hat.shape != demod.s.shape:
        raise GeometryError("estimate and demodulator grids differ in shape")
    s = demod.s[:, cfg.data_bins]
    h = est.H_hat[:, cfg.data_bins]
    bad = np.abs(h) < floor
    safe = np.where(bad, 1.0, h)
    eq = np.where(bad, 0.0, s / safe)
    return Equalized(eq, bad)
