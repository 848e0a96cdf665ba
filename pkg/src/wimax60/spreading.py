"""PN sequence generation and XOR spreading into fixed-size chip frames."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import DegenerateSeedError, GeometryError

DEFAULT_DEGREE = 15
DEFAULT_TAPS = (15, 14)
DEFAULT_FRAME_LEN = 288
DEFAULT_CHIP_RATE = 1000.0


def taps_to_mask(taps) -> int:
    """Polynomial exponents (excluding the constant term) to a register bit mask."""
    mask = 0
    for t in taps:
        if t < 1:
            raise GeometryError(f"tap exponent must be >= 1, got {t}")
        mask |= 1 << (t - 1)
    return mask


@lru_cache(maxsize=16)
def _period_table(mask: int, degree: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Output bits and successive states over one full cycle starting at ``seed``."""
    full = (1 << degree) - 1
    outs = []
    states = []
    state = seed
    while True:
        states.append(state)
        fb = (state & mask).bit_count() & 1
        outs.append(fb)
        state = ((state << 1) | fb) & full
        if state == seed or len(outs) > full:
            break
    o = np.array(outs, dtype=np.uint8)
    s = np.array(states, dtype=np.int64)
    o.flags.writeable = False
    s.flags.writeable = False
    return o, s


class PnGenerator:
    """Fibonacci LFSR. Each step outputs the parity of the tapped bits and shifts it in.

    The default register is the x^15 + x^14 + 1 randomizer seeded all-ones.
    """

    def __init__(self, taps=DEFAULT_TAPS, degree: int = DEFAULT_DEGREE, seed: int | None = None):
        if degree < 2 or degree > 32:
            raise GeometryError(f"degree must be in [2, 32], got {degree}")
        self.degree = degree
        self.taps = tuple(sorted(taps, reverse=True))
        if max(self.taps) > degree:
            raise GeometryError(f"tap {max(self.taps)} exceeds register degree {degree}")
        self.mask = taps_to_mask(self.taps)
        full = (1 << degree) - 1
        self.seed = full if seed is None else int(seed)
        if self.seed < 0 or self.seed & ~full:
            raise GeometryError(f"seed 0x{self.seed:X} wider than {degree} bits")
        if self.seed == 0:
            raise DegenerateSeedError("LFSR seed must be nonzero")
        self._pos = 0

    @property
    def state(self) -> int:
        _, states = _period_table(self.mask, self.degree, self.seed)
        return int(states[self._pos % states.size])

    def period(self) -> int:
        return _period_table(self.mask, self.degree, self.seed)[0].size

    def next(self, n: int) -> np.ndarray:
        """Next ``n`` chips; advances the register."""
        if n < 0:
            raise GeometryError("chip count must be non-negative")
        outs, _ = _period_table(self.mask, self.degree, self.seed)
        idx = (self._pos + np.arange(n)) % outs.size
        self._pos = (self._pos + n) % outs.size
        return outs[idx].copy()

    def clone(self) -> "PnGenerator":
        """Fresh generator with the same polynomial and seed, at the start of its sequence."""
        return PnGenerator(self.taps, self.degree, self.seed)

    def __repr__(self):
        return f"PnGenerator(taps={self.taps}, degree={self.degree}, seed=0x{self.seed:X})"


def pn_next(gen: PnGenerator, n: int) -> np.ndarray:
    return gen.next(n)


def pn_step_reference(state: int, mask: int, degree: int) -> tuple[int, int]:
    """One bit-serial LFSR step; returns (output, new_state)."""
    fb = bin(state & mask).count("1") & 1
    return fb, ((state << 1) | fb) & ((1 << degree) - 1)


@dataclass(frozen=True)
class ChipFrame:
    chips: np.ndarray
    chip_rate: float = DEFAULT_CHIP_RATE
    payload_len: int = 0

    def __post_init__(self):
        c = np.array(self.chips, dtype=np.uint8).reshape(-1)
        if np.any(c > 1):
            raise GeometryError("chips must be 0/1")
        if not 0 <= self.payload_len <= c.size:
            raise GeometryError(f"payload_len {self.payload_len} outside frame of {c.size}")
        if np.any(c[self.payload_len :]):
            raise GeometryError("pad region of a chip frame must be zero")
        c.flags.writeable = False
        object.__setattr__(self, "chips", c)

    @property
    def frame_len(self) -> int:
        return self.chips.size

    @property
    def duration(self) -> float:
        return self.frame_len / self.chip_rate

    def to_text(self) -> str:
        padded = np.concatenate([self.chips, np.zeros(-self.frame_len % 8, dtype=np.uint8)])
        return f"{self.frame_len} {self.payload_len} {self.chip_rate!r}\n{np.packbits(padded).tobytes().hex()}\n"

    @classmethod
    def from_text(cls, text: str) -> "ChipFrame":
        lines = [ln.strip() for ln in text.strip().splitlines()]
        if len(lines) < 1:
            raise GeometryError("empty chip frame text")
        try:
            frame_len, payload_len, rate = lines[0].split()
            frame_len, payload_len, rate = int(frame_len), int(payload_len), float(rate)
        except ValueError as exc:
            raise GeometryError(f"bad chip frame header line: {lines[0]!r}") from exc
        hexstr = "".join(lines[1:])
        raw = np.frombuffer(bytes.fromhex(hexstr), dtype=np.uint8)
        bits = np.unpackbits(raw)
        if bits.size < frame_len:
            raise GeometryError(f"chip text holds {bits.size} bits, header says {frame_len}")
        return cls(bits[:frame_len], rate, payload_len)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "ChipFrame":
        return cls.from_text(Path(path).read_text())


def spread(data, gen: PnGenerator, frame_len: int = DEFAULT_FRAME_LEN, chip_rate: float = DEFAULT_CHIP_RATE) -> ChipFrame:
    """XOR ``data`` with the next PN chips and zero-pad to ``frame_len``."""
    d = np.asarray(data, dtype=np.uint8).reshape(-1)
    if d.size > frame_len:
        raise GeometryError(f"{d.size} data bits do not fit a {frame_len}-chip frame")
    chips = np.zeros(frame_len, dtype=np.uint8)
    chips[: d.size] = d ^ gen.next(d.size)
    return ChipFrame(chips, chip_rate, d.size)


def despread(frame: ChipFrame, gen: PnGenerator) -> np.ndarray:
    if frame.payload_len > frame.frame_len:
        raise GeometryError("payload_len exceeds frame length")
    n = frame.payload_len
    return frame.chips[:n] ^ gen.next(n)


def spread_stream(data, gen: PnGenerator, data_per_frame: int, frame_len: int = DEFAULT_FRAME_LEN) -> np.ndarray:
    """Vectorized :func:`spread` over consecutive frames; returns (n_frames, frame_len) chips.

    The last frame carries the remainder of ``data``; its payload length is
    ``len(data) - (n_frames - 1) * data_per_frame``.
    """
    d = np.asarray(data, dtype=np.uint8).reshape(-1)
    if not 0 < data_per_frame <= frame_len:
        raise GeometryError(f"data_per_frame must be in (0, {frame_len}], got {data_per_frame}")
    n_frames = -(-d.size // data_per_frame)
    padded = np.zeros(n_frames * data_per_frame, dtype=np.uint8)
    padded[: d.size] = d ^ gen.next(d.size)
    chips = np.zeros((n_frames, frame_len), dtype=np.uint8)
    chips[:, :data_per_frame] = padded.reshape(n_frames, data_per_frame)
    return chips


def despread_stream(chips: np.ndarray, gen: PnGenerator, data_per_frame: int, n_bits: int) -> np.ndarray:
    c = np.asarray(chips, dtype=np.uint8)
    payload = c[:, :data_per_frame].reshape(-1)[:n_bits]
    return payload ^ gen.next(n_bits)
