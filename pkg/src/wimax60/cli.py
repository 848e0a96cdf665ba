"""Command-line front end.

    wimax60 loopback     [--config FILE] [--seed N] [--out DIR] [--ebn0 DB]
    wimax60 sweep        [--config FILE] [--seed N] [--out DIR] [--ebn0 LIST] [--jobs N]
    wimax60 inspect      CAPTURE [--out DIR]
    wimax60 make-profile [PATH] [--out DIR]

Exit codes: 0 success, 2 configuration or usage error, 3 runtime/data error.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .channel import ChannelProfile, Tap
from .config import RunConfig, load_config, with_overrides
from .dsp import occupied_bandwidth, psd_estimate
from .errors import CaptureError, ConfigError, ProfileError, SimError
from .link import run_link, sweep_seed
from .metrics import LinkReport, capture_bytes, capture_info, qpsk_ber_theory

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="run configuration file")
    common.add_argument("--seed", type=_u64, default=argparse.SUPPRESS, help="master seed (overrides config)")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory (default: ./out)")

    parser = _Parser(prog="wimax60", description="WiMAX OFDM link-level simulator", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    lb = sub.add_parser("loopback", parents=[common], help="run the chain once and export artifacts")
    lb.add_argument("--ebn0", type=float, default=None, help="Eb/N0 in dB (overrides config noise)")

    sw = sub.add_parser("sweep", parents=[common], help="BER/EVM versus Eb/N0")
    sw.add_argument("--ebn0", type=_float_list, default=None, help="comma-separated Eb/N0 points in dB")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")

    ins = sub.add_parser("inspect", parents=[common], help="summarize an I/Q capture")
    ins.add_argument("capture", type=Path)
    ins.add_argument("--segment", type=int, default=1024, help="PSD segment length")

    mp = sub.add_parser("make-profile", parents=[common], help="write an example channel profile")
    mp.add_argument("path", type=Path, nargs="?", default=None)
    return parser


def example_profile() -> ChannelProfile:
    """Illustrative three-path vehicular profile; delays on the 2.24 MHz grid, 1 kHz Doppler."""
    fs = 2.24e6
    taps = (
        Tap(0.0, 0.6, 1000.0),
        Tap(4 / fs, 0.3, 1000.0),
        Tap(12 / fs, 0.1, 1000.0),
    )
    return ChannelProfile(taps, 0.0)


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    return with_overrides(cfg, getattr(args, "seed", None))


def _out_dir(args) -> Path:
    return getattr(args, "out", None) or Path("out")


def _commit(staging: Path, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for f in sorted(staging.iterdir()):
        os.replace(f, out / f.name)


def cmd_loopback(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    ebn0 = args.ebn0 if args.ebn0 is not None else cfg.ebn0_db
    result = run_link(cfg.link, cfg.seed, ebn0_db=ebn0)
    report = result.report
    report.profile = cfg.profile_source
    report.config = cfg.flat()
    fc = cfg.link.frame
    used_bins = np.sort(np.concatenate([fc.data_bins, fc.pilot_bins]))
    obw = occupied_bandwidth(result.spectrum)
    out.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out.parent, prefix=".wimax60-") as tmp:
        t = Path(tmp)
        (t / "report.txt").write_text(report.to_text() + f"occupied_bw_hz = {obw!r}\n")
        (t / "tx.iq").write_bytes(capture_bytes(result.tx_capture))
        (t / "rx.iq").write_bytes(capture_bytes(result.rx_capture))
        result.spectrum.to_csv(t / "spectrum.csv")
        result.constellation.to_csv(t / "constellation.csv", fc)
        result.estimate.to_csv(t / "channel.csv", truth=result.truth, bins=used_bins)
        _commit(t, out)
    print(
        f"bits={report.bits_compared} errors={report.bit_errors} ber={report.ber:.3e} "
        f"evm={report.evm_rms:.3f}% pdus_ok={report.pdus_ok}/{report.pdus_sent} "
        f"occupied_bw={obw / 1e6:.4f} MHz -> {out}"
    )
    return EXIT_OK


def _sweep_point(job):
    link, seed, ebn0 = job
    res = run_link(link, seed, ebn0_db=ebn0)
    return res.report, capture_bytes(res.rx_capture)


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    points = args.ebn0 if args.ebn0 is not None else cfg.sweep_ebn0_db
    if not points:
        raise _UsageError("sweep needs at least one Eb/N0 point (--ebn0 or [sweep] ebn0_db)")
    out = _out_dir(args)
    jobs = [(cfg.link, sweep_seed(cfg.seed, i), e) for i, e in enumerate(points)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    lines = [",".join(LinkReport.CSV_FIELDS + ("ber_theory",))]
    for rep, _ in results:
        lines.append(rep.csv_row() + f",{float(qpsk_ber_theory(rep.ebn0_db))!r}")
    out.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out.parent, prefix=".wimax60-") as tmp:
        t = Path(tmp)
        (t / "sweep.csv").write_text("\n".join(lines) + "\n")
        (t / "sweep_config.txt").write_text(cfg.to_text())
        for i, (_, cap) in enumerate(results):
            (t / f"rx_{i:02d}.iq").write_bytes(cap)
        _commit(t, out)
    for rep, _ in results:
        print(f"Eb/N0={rep.ebn0_db:6.2f} dB  BER={rep.ber:.4e}  EVM={rep.evm_rms:.2f}%")
    return EXIT_OK


def cmd_inspect(args) -> int:
    info, buf = capture_info(args.capture)
    out = _out_dir(args)
    x = buf.samples
    lines = [
        f"file = {args.capture}",
        f"version = {info.version}",
        f"sample_rate = {info.sample_rate!r}",
        f"center_freq = {info.center_freq!r}",
        f"sample_count = {info.sample_count}",
    ]
    if x.size:
        seg = min(args.segment, x.size)
        spec = psd_estimate(buf, seg) if seg >= 2 else None
        lines += [
            f"mean_power = {buf.mean_power()!r}",
            f"peak_abs = {float(np.max(np.abs(x)))!r}",
            f"mean_i = {float(np.mean(x.real))!r}",
            f"mean_q = {float(np.mean(x.imag))!r}",
        ]
        if spec is not None:
            lines.append(f"psd_peak_hz = {spec.peak_freq()!r}")
            if spec.total_power() > 0:
                lines.append(f"occupied_bw_99_hz = {occupied_bandwidth(spec)!r}")
            out.mkdir(parents=True, exist_ok=True)
            spec.to_csv(out / f"{args.capture.stem}_spectrum.csv")
    print("\n".join(lines))
    return EXIT_OK


def cmd_make_profile(args) -> int:
    path = args.path or (_out_dir(args) / "profile.txt")
    path.parent.mkdir(parents=True, exist_ok=True)
    example_profile().save(path)
    print(f"wrote {path}")
    return EXIT_OK


class _UsageError(Exception):
    pass


COMMANDS = {
    "loopback": cmd_loopback,
    "sweep": cmd_sweep,
    "inspect": cmd_inspect,
    "make-profile": cmd_make_profile,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"wimax60: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ProfileError) as exc:
        print(f"wimax60: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CaptureError as exc:
        print(f"wimax60: capture error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (SimError, OSError) as exc:
        print(f"wimax60: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
