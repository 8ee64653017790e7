"""Command-line interface.

Subcommands: synth, simulate, analyze, classify, mix, sweep, ingest.
Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Dict, List, Optional

from . import __version__
from .errors import SimulationError, ValidationError
from .fuzzy import classify, default_partition
from .netsim import simulate
from .pipeline import (
    ExperimentConfig,
    PATH_TERMINALS,
    emit_report,
    ingest_csv,
    load_config,
    run_mixing_from_config,
    run_sweep,
    write_recording_csv,
)
from .signals import EndogenousNoiseSpec, TimeSeries, WaveformSpec, add_endogenous_noise, synthesize
from .spectral import amplitude_spectrum, harmonic_report

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; remap to the validation code.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _load_config_arg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    return cfg


def _cmd_synth(args) -> int:
    spec = WaveformSpec(args.kind, args.freq_hz, args.vpp, args.phase_rad, args.dc_v)
    ts = synthesize(spec, args.dt_s, args.duration_s)
    if args.noise_rms > 0:
        noise = EndogenousNoiseSpec(
            band_low_hz=args.noise_band[0],
            band_high_hz=args.noise_band[1],
            rms_v=args.noise_rms,
            seed=args.seed if args.seed is not None else 0,
        )
        ts = add_endogenous_noise(ts, noise)
    dest = args.out if args.out else sys.stdout
    write_recording_csv(dest, {"v": ts})
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = _load_config_arg(args)
    freq = args.freq_hz if args.freq_hz is not None else cfg.sweep_hz[0]
    duration = args.duration_s
    if duration is None:
        duration = cfg.settle_s + cfg.drive_periods / freq
    drive = synthesize(WaveformSpec("sine", freq, cfg.drive_vpp_v), cfg.sim.dt_s, duration)
    if args.path == "both":
        drives = {terminal: drive for terminal in PATH_TERMINALS.values()}
    else:
        drives = {PATH_TERMINALS[args.path]: drive}
    outs = simulate(cfg.topology, drives, cfg.sim)
    channels: Dict[str, TimeSeries] = {f"ch{i}": ts for i, ts in sorted(outs.items())}
    dest = args.out if args.out else sys.stdout
    write_recording_csv(dest, channels)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    channels = ingest_csv(args.recording, resample=args.resample)
    if args.channel is not None:
        if args.channel not in channels:
            raise ValidationError(
                f"channel {args.channel!r} not in recording (have {sorted(channels)})"
            )
        channels = {args.channel: channels[args.channel]}
    partition = _load_config_arg(args).partition if args.config else default_partition()

    rows = []
    for name, ts in channels.items():
        sp = amplitude_spectrum(ts, args.window)
        rep = harmonic_report(sp, args.f0_hz, args.k_max, args.tol_bins)
        label = classify(partition, rep.thd_f * 100.0).label
        rows.append(
            {
                "channel": name,
                "f0_hz": rep.f0_hz,
                "harmonics_v": [float(v) for v in rep.harmonics_v],
                "thd_f": rep.thd_f,
                "thd_r": rep.thd_r,
                "ratio_2_3": rep.ratio_2_3,
                "label": label,
            }
        )

    dest = args.out if args.out else sys.stdout
    if args.format == "json":
        _write_text(dest, json.dumps({"reports": rows}, indent=2) + "\n")
    else:
        import csv as _csv

        from .pipeline import _open_text

        k = max(len(r["harmonics_v"]) for r in rows)
        with _open_text(dest) as fh:
            writer = _csv.writer(fh)
            writer.writerow(
                ["channel", "f0_hz"] + [f"V{i}" for i in range(1, k + 1)]
                + ["thd_f", "thd_r", "ratio_2_3", "label"]
            )
            for r in rows:
                harmonics = [repr(v) for v in r["harmonics_v"]]
                harmonics += [""] * (k - len(harmonics))
                writer.writerow(
                    [r["channel"], repr(r["f0_hz"])] + harmonics
                    + [repr(r["thd_f"]), repr(r["thd_r"]), repr(r["ratio_2_3"]), r["label"]]
                )
    return EXIT_OK


def _cmd_classify(args) -> int:
    partition = _load_config_arg(args).partition if args.config else default_partition()
    results = []
    if args.value is not None:
        cls = classify(partition, args.value)
        results.append({"thd_percent": args.value, "label": cls.label, "memberships": cls.memberships})
    elif args.report:
        with open(args.report, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        reports = doc.get("reports") or doc.get("entries")
        if reports is None:
            raise ValidationError(f"{args.report}: no 'reports' or 'entries' array found")
        for r in reports:
            value = r["thd_f"] * 100.0
            cls = classify(partition, value)
            key = r.get("channel", r.get("path", "?"))
            results.append({"source": key, "thd_percent": value, "label": cls.label,
                            "memberships": cls.memberships})
    else:
        raise ValidationError("provide a THD value in percent or --report PATH")

    dest = args.out if args.out else sys.stdout
    if args.format == "json":
        _write_text(dest, json.dumps({"classifications": results}, indent=2) + "\n")
    else:
        lines = [f"{r.get('source', 'value')},{r['thd_percent']:.6g},{r['label']}" for r in results]
        _write_text(dest, "\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_mix(args) -> int:
    cfg = _load_config_arg(args)
    f2_list = tuple(args.f2_hz) if args.f2_hz else (0.002, 0.005, 0.007)
    reports = run_mixing_from_config(cfg, f2_list_hz=f2_list, base_f1_hz=args.base_f1_hz,
                                     channel=args.channel)
    dest = args.out if args.out else sys.stdout
    emit_report(reports, args.format, dest)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config_arg(args)
    result = run_sweep(cfg)
    dest = args.out if args.out else sys.stdout
    emit_report(result, args.format, dest)
    return EXIT_OK


def _cmd_ingest(args) -> int:
    channels = ingest_csv(args.recording, resample=args.resample)
    first = next(iter(channels.values()))
    summary = {
        "channels": sorted(channels),
        "dt_s": first.dt_s,
        "n_samples": len(first),
        "t0_s": first.t0_s,
        "duration_s": first.duration_s,
    }
    if args.out:
        write_recording_csv(args.out, channels)
    print(json.dumps(summary))
    return EXIT_OK


def _write_text(dest, text: str) -> None:
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)


def _add_common(p: argparse.ArgumentParser, fmt: bool = True) -> None:
    p.add_argument("--config", metavar="PATH", help="experiment config JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", metavar="PATH", help="output path (default: stdout)")
    if fmt:
        p.add_argument("--format", choices=("csv", "json"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mycelsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="synthesize a waveform to a recording CSV")
    p.add_argument("--kind", choices=("sine", "square", "triangle"), default="sine")
    p.add_argument("--freq-hz", type=float, required=True)
    p.add_argument("--vpp", type=float, default=10.0)
    p.add_argument("--phase-rad", type=float, default=0.0)
    p.add_argument("--dc-v", type=float, default=0.0)
    p.add_argument("--dt-s", type=float, default=1.0)
    p.add_argument("--duration-s", type=float, required=True)
    p.add_argument("--noise-rms", type=float, default=0.0)
    p.add_argument("--noise-band", type=float, nargs=2, default=(0.05, 0.2),
                   metavar=("LOW_HZ", "HIGH_HZ"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("simulate", help="simulate one drive point to a recording CSV")
    _add_common(p, fmt=False)
    p.add_argument("--freq-hz", type=float, help="drive frequency (default: first sweep entry)")
    p.add_argument("--path", choices=("path1", "path2", "both"), default="path1")
    p.add_argument("--duration-s", type=float, help="override settle + drive_periods/freq")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="harmonic/THD report for a recording CSV")
    p.add_argument("recording", help="recording CSV path")
    p.add_argument("--f0-hz", type=float, required=True, help="fundamental frequency")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--tol-bins", type=int, default=2)
    p.add_argument("--window", choices=("rectangular", "blackman"), default="blackman")
    p.add_argument("--channel", help="analyze a single named channel")
    p.add_argument("--resample", action="store_true", help="resample jittered timestamps")
    _add_common(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("classify", help="fuzzy category for a THD value or report")
    p.add_argument("value", type=float, nargs="?", help="THD_F in percent")
    p.add_argument("--report", metavar="PATH", help="analyze/sweep JSON to classify")
    _add_common(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("mix", help="two-tone mixing experiment")
    p.add_argument("--base-f1-hz", type=float, default=0.001)
    p.add_argument("--f2-hz", type=float, nargs="+", help="path-2 frequencies (default 2,5,7 mHz)")
    p.add_argument("--channel", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=_cmd_mix)

    p = sub.add_parser("sweep", help="full frequency sweep with reports")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("ingest", help="validate (and optionally resample) a logger CSV")
    p.add_argument("recording", help="recording CSV path")
    p.add_argument("--resample", action="store_true")
    p.add_argument("--out", metavar="PATH", help="write the normalized recording CSV here")
    p.set_defaults(func=_cmd_ingest)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"mycelsim: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SimulationError as exc:
        print(f"mycelsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"mycelsim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
