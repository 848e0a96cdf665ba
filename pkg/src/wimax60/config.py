"""Run configuration files: ``[section]`` headers, ``key = value`` lines, ``#`` comments.

Every key is optional; unknown sections or keys are rejected with the line
number. ``tap`` may repeat inside ``[channel]`` (same syntax as a profile
file); all other keys may appear once.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .channel import ChannelProfile
from .errors import ConfigError, SimError
from .link import LinkConfig
from .ofdm import FrameConfig


def _int(v: str) -> int:
    return int(v, 0)


def _intlist(v: str) -> tuple[int, ...]:
    return tuple(int(x, 0) for x in v.split(",") if x.strip())


def _floatlist(v: str) -> tuple[float, ...]:
    return tuple(float(x) for x in v.split(",") if x.strip())


def _str(v: str) -> str:
    return v


SCHEMA: dict[str, dict[str, object]] = {
    "frame": {
        "n_fft": _int,
        "n_data": _int,
        "n_pilots": _int,
        "pilot_indices": _intlist,
        "guard_len": _int,
        "sample_rate": float,
        "pilot_mode": _str,
    },
    "spreading": {
        "frame_len": _int,
        "data_bits_per_frame": _int,
        "chip_rate_hz": float,
        "pn_degree": _int,
        "pn_taps": _intlist,
        "pn_seed": _int,
    },
    "mac": {k: _int for k in ("payload_bytes", "cid", "ht", "ec", "ptype", "eks", "ci")},
    "channel": {"profile": _str, "tap": _str, "noise_variance": float},
    "run": {
        "seed": _int,
        "bits": _int,
        "estimator": _str,
        "ebn0_db": float,
        "ebn0_reference": _str,
        "chunk_symbols": _int,
        "capture_symbols": _int,
        "psd_segment": _int,
    },
    "sweep": {"ebn0_db": _floatlist},
}

_LINK_KEYS = {
    ("spreading", "frame_len"): "frame_len",
    ("spreading", "data_bits_per_frame"): "data_bits_per_frame",
    ("spreading", "chip_rate_hz"): "chip_rate",
    ("spreading", "pn_degree"): "pn_degree",
    ("spreading", "pn_taps"): "pn_taps",
    ("spreading", "pn_seed"): "pn_seed",
    ("mac", "payload_bytes"): "payload_bytes",
    ("mac", "cid"): "cid",
    ("mac", "ht"): "ht",
    ("mac", "ec"): "ec",
    ("mac", "ptype"): "ptype",
    ("mac", "eks"): "eks",
    ("mac", "ci"): "ci",
    ("run", "bits"): "bits",
    ("run", "estimator"): "estimator",
    ("run", "ebn0_reference"): "ebn0_reference",
    ("run", "chunk_symbols"): "chunk_symbols",
    ("run", "capture_symbols"): "capture_symbols",
    ("run", "psd_segment"): "psd_segment",
}


@dataclass(frozen=True)
class RunConfig:
    link: LinkConfig = field(default_factory=LinkConfig)
    seed: int = 1
    ebn0_db: float | None = None
    sweep_ebn0_db: tuple[float, ...] = ()
    profile_source: str = "identity"

    def flat(self) -> dict[str, object]:
        """Resolved settings as ``section.key -> value``, in a fixed order."""
        lk, fc = self.link, self.link.frame
        out: dict[str, object] = {}
        for f in ("n_fft", "n_data", "n_pilots", "pilot_indices", "guard_len", "sample_rate", "pilot_mode"):
            out[f"frame.{f}"] = getattr(fc, f)
        for (section, key), attr in _LINK_KEYS.items():
            out[f"{section}.{key}"] = getattr(lk, attr)
        out["channel.profile"] = self.profile_source
        for i, t in enumerate(lk.profile.taps):
            out[f"channel.tap{i}"] = (t.delay, t.power, t.doppler, "rayleigh" if t.fading else "fixed")
        out["channel.noise_variance"] = lk.profile.noise_variance
        out["run.seed"] = self.seed
        out["run.ebn0_db"] = self.ebn0_db
        out["sweep.ebn0_db"] = self.sweep_ebn0_db
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {_show(v)}\n" for k, v in self.flat().items())


def _show(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_show(x) for x in v)
    if isinstance(v, float):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def parse_config(text: str, source: str | None = None, base_dir: Path | None = None) -> RunConfig:
    values: dict[tuple[str, str], tuple[object, int]] = {}
    taps: list[tuple[str, int]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno, source)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno, source)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        conv = SCHEMA[section].get(key)
        if conv is None:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, source)
        if section == "channel" and key == "tap":
            taps.append((value, lineno))
            continue
        if (section, key) in values:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno, source)
        try:
            values[(section, key)] = (conv(value), lineno)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {value!r} ({exc})", lineno, source) from exc

    def get(section, key, default=None):
        return values[(section, key)][0] if (section, key) in values else default

    def line_of(section, key):
        return values[(section, key)][1] if (section, key) in values else None

    try:
        frame_kwargs = {k: v for (s, k), (v, _) in values.items() if s == "frame"}
        frame = FrameConfig(**frame_kwargs)
    except (SimError, TypeError) as exc:
        raise ConfigError(f"invalid [frame]: {exc}", None, source) from exc

    profile_path = get("channel", "profile")
    if profile_path is not None and taps:
        raise ConfigError("give either channel.profile or inline taps, not both", line_of("channel", "profile"), source)
    try:
        if profile_path is not None:
            p = Path(profile_path)
            if not p.is_absolute() and base_dir is not None:
                p = base_dir / p
            profile = ChannelProfile.load(p)
            profile_source = str(profile_path)
        elif taps:
            profile = ChannelProfile.from_text("\n".join(f"tap = {v}" for v, _ in taps), source)
            profile_source = "inline"
        else:
            profile = ChannelProfile.identity()
            profile_source = "identity"
        if ("channel", "noise_variance") in values:
            profile = profile.with_noise(get("channel", "noise_variance"))
    except OSError as exc:
        raise ConfigError(f"cannot read channel profile: {exc}", line_of("channel", "profile"), source) from exc
    except SimError as exc:
        raise ConfigError(str(exc), line_of("channel", "profile") or (taps[0][1] if taps else None), source) from exc

    link_kwargs = {attr: get(s, k) for (s, k), attr in _LINK_KEYS.items() if (s, k) in values}
    try:
        link = LinkConfig(frame=frame, profile=profile, **link_kwargs)
    except SimError as exc:
        raise ConfigError(f"invalid link settings: {exc}", None, source) from exc

    return RunConfig(
        link=link,
        seed=get("run", "seed", 1),
        ebn0_db=get("run", "ebn0_db"),
        sweep_ebn0_db=get("sweep", "ebn0_db", ()),
        profile_source=profile_source,
    )


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, str(p)) from exc
    return parse_config(text, str(p), p.parent)


def with_overrides(cfg: RunConfig, seed: int | None = None) -> RunConfig:
    return cfg if seed is None else replace(cfg, seed=seed)
