"""Experiment configuration, CSV ingestion, sweep orchestration, reporting.

The config is a single JSON document that round-trips every field of
ExperimentConfig.  Recordings are exchanged as UTF-8 comma-separated files
with a mandatory header: first column time in seconds, remaining columns
named voltage channels.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .errors import SimulationError, ValidationError
from .fuzzy import (
    Classification,
    FuzzyPartition,
    classify,
    default_partition,
    partition_from_dict,
    partition_to_dict,
    threshold_discriminate,
)
from .mixing import MixReport, run_mixing_experiment
from .netsim import (
    DualTransportParams,
    Edge,
    NetworkTopology,
    SimConfig,
    Terminals,
    default_topology,
    simulate,
)
from .signals import EndogenousNoiseSpec, TimeSeries, WaveformSpec, add_endogenous_noise, synthesize
from .spectral import HarmonicReport, amplitude_spectrum, harmonic_report, normalized_ratio_series

PATH_TERMINALS = {"path1": "input1", "path2": "input2"}

DEFAULT_SWEEP_HZ: Tuple[float, ...] = tuple(i / 1000.0 for i in range(1, 11)) + tuple(
    i / 100.0 for i in range(2, 11)
)


@dataclass(frozen=True)
class AnalysisConfig:
    k_max: int = 10
    tol_bins: int = 2
    ref_freq_hz: float = 0.01
    exclusions: Tuple[float, ...] = ()
    window: str = "blackman"

    def __post_init__(self):
        object.__setattr__(self, "exclusions", tuple(self.exclusions))
        if self.k_max < 2:
            raise ValidationError(f"k_max must be >= 2, got {self.k_max}")
        if self.tol_bins < 0:
            raise ValidationError(f"tol_bins must be >= 0, got {self.tol_bins}")
        if not (self.ref_freq_hz > 0):
            raise ValidationError(f"ref_freq_hz must be positive, got {self.ref_freq_hz}")


@dataclass(frozen=True)
class ExperimentConfig:
    sweep_hz: Tuple[float, ...] = DEFAULT_SWEEP_HZ
    drive_vpp_v: float = 10.0
    paths: Tuple[str, ...] = ("path1", "path2")
    topology: NetworkTopology = field(default_factory=default_topology)
    sim: SimConfig = field(default_factory=SimConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    partition: FuzzyPartition = field(default_factory=default_partition)
    noise: EndogenousNoiseSpec = field(default_factory=EndogenousNoiseSpec)
    seed: int = 0
    drive_periods: int = 8
    settle_s: float = 300.0

    def __post_init__(self):
        object.__setattr__(self, "sweep_hz", tuple(self.sweep_hz))
        object.__setattr__(self, "paths", tuple(self.paths))
        if not self.sweep_hz:
            raise ValidationError("sweep_hz must not be empty")
        if any(f <= 0 for f in self.sweep_hz):
            raise ValidationError("sweep frequencies must be positive")
        if any(b <= a for a, b in zip(self.sweep_hz, self.sweep_hz[1:])):
            raise ValidationError("sweep frequencies must be strictly increasing")
        if not self.paths or any(p not in PATH_TERMINALS for p in self.paths):
            raise ValidationError(f"paths must be a nonempty subset of {sorted(PATH_TERMINALS)}")
        if _find_close(self.sweep_hz, self.analysis.ref_freq_hz) is None:
            raise ValidationError(
                f"ref_freq_hz={self.analysis.ref_freq_hz} not in sweep frequencies"
            )
        if self.drive_periods < 1:
            raise ValidationError(f"drive_periods must be >= 1, got {self.drive_periods}")
        if self.settle_s < 0:
            raise ValidationError(f"settle_s must be >= 0, got {self.settle_s}")
        if self.drive_vpp_v < 0:
            raise ValidationError(f"drive_vpp_v must be >= 0, got {self.drive_vpp_v}")


@dataclass(frozen=True)
class SweepEntry:
    freq_hz: float
    path: str
    channel: int
    report: HarmonicReport
    label: str
    memberships: Dict[str, float]
    normalized_ratio: Optional[float]


@dataclass(frozen=True)
class SweepResult:
    entries: Tuple[SweepEntry, ...]
    config_hash: str
    seed: int
    tool_version: str = __version__

    def thd_series(self, path: str, channel: int) -> Dict[float, float]:
        return {
            e.freq_hz: e.report.thd_f
            for e in self.entries
            if e.path == path and e.channel == channel
        }

    def normalized_ratios(self, path: str, channel: int) -> Dict[float, float]:
        return {
            e.freq_hz: e.normalized_ratio
            for e in self.entries
            if e.path == path and e.channel == channel and e.normalized_ratio is not None
        }

    def discriminate(self, path: str, channel: int, threshold: float = 1.0) -> Dict[str, str]:
        """Two-way split of each frequency's normalized harmonic ratio.

        The reference frequency of the analysis config acts as the threshold
        frequency: points whose normalized V2/V3 ratio sits below `threshold`
        land in the slow, strongly-distorting regime ("below").
        """
        return {
            f: threshold_discriminate(v, threshold)
            for f, v in self.normalized_ratios(path, channel).items()
        }


def _find_close(values, target: float) -> Optional[float]:
    for v in values:
        if math.isclose(v, target, rel_tol=1e-9, abs_tol=1e-15):
            return v
    return None


# ---------------------------------------------------------------------------
# Config serialization

def _params_to_dict(p: DualTransportParams) -> dict:
    return {
        "g_fast_S": p.g_fast_S,
        "g_slow_S": p.g_slow_S,
        "tau_s": p.tau_s,
        "alpha2_per_V": p.alpha2_per_V,
        "alpha3_per_V2": p.alpha3_per_V2,
        "v_half_V": p.v_half_V,
    }


def _params_from_dict(d: dict) -> DualTransportParams:
    return DualTransportParams(**d)


def topology_to_dict(top: NetworkTopology) -> dict:
    return {
        "node_count": top.node_count,
        "edges": [
            {"node_a": e.node_a, "node_b": e.node_b, "params": _params_to_dict(e.params)}
            for e in top.edges
        ],
        "terminals": {
            "input1": top.terminals.input1,
            "input2": top.terminals.input2,
            "ground": top.terminals.ground,
        },
        "channels": [list(c) for c in top.channels],
    }


def topology_from_dict(d: dict) -> NetworkTopology:
    return NetworkTopology(
        node_count=d["node_count"],
        edges=tuple(
            Edge(e["node_a"], e["node_b"], _params_from_dict(e["params"])) for e in d["edges"]
        ),
        terminals=Terminals(**d["terminals"]),
        channels=tuple(tuple(c) for c in d["channels"]),
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "sweep_hz": list(cfg.sweep_hz),
        "drive_vpp_v": cfg.drive_vpp_v,
        "paths": list(cfg.paths),
        "topology": topology_to_dict(cfg.topology),
        "sim": {
            "dt_s": cfg.sim.dt_s,
            "duration_s": cfg.sim.duration_s,
            "newton_tol_V": cfg.sim.newton_tol_V,
            "newton_max_iter": cfg.sim.newton_max_iter,
            "w_initial": cfg.sim.w_initial,
        },
        "analysis": {
            "k_max": cfg.analysis.k_max,
            "tol_bins": cfg.analysis.tol_bins,
            "ref_freq_hz": cfg.analysis.ref_freq_hz,
            "exclusions": list(cfg.analysis.exclusions),
            "window": cfg.analysis.window,
        },
        "partition": partition_to_dict(cfg.partition),
        "noise": {
            "band_low_hz": cfg.noise.band_low_hz,
            "band_high_hz": cfg.noise.band_high_hz,
            "rms_v": cfg.noise.rms_v,
            "seed": cfg.noise.seed,
        },
        "seed": cfg.seed,
        "drive_periods": cfg.drive_periods,
        "settle_s": cfg.settle_s,
    }


def config_from_dict(d: dict) -> ExperimentConfig:
    kwargs: dict = {}
    if "sweep_hz" in d:
        kwargs["sweep_hz"] = tuple(d["sweep_hz"])
    if "drive_vpp_v" in d:
        kwargs["drive_vpp_v"] = d["drive_vpp_v"]
    if "paths" in d:
        kwargs["paths"] = tuple(d["paths"])
    if "topology" in d:
        kwargs["topology"] = topology_from_dict(d["topology"])
    if "sim" in d:
        kwargs["sim"] = SimConfig(**d["sim"])
    if "analysis" in d:
        a = dict(d["analysis"])
        a["exclusions"] = tuple(a.get("exclusions", ()))
        kwargs["analysis"] = AnalysisConfig(**a)
    if "partition" in d:
        kwargs["partition"] = partition_from_dict(d["partition"])
    if "noise" in d:
        kwargs["noise"] = EndogenousNoiseSpec(**d["noise"])
    for key in ("seed", "drive_periods", "settle_s"):
        if key in d:
            kwargs[key] = d[key]
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid config JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"config root must be a JSON object, got {type(data).__name__}")
    try:
        return config_from_dict(data)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from exc


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# CSV ingestion

def ingest_csv(source, resample: bool = False, jitter_tol: float = 0.01) -> Dict[str, TimeSeries]:
    """Read a logger CSV into one TimeSeries per voltage column.

    Layout: header row, first column time in seconds, remaining columns named
    channels in volts.  dt is the median time delta.  Timestamp jitter beyond
    jitter_tol * dt is an error unless resample is set, in which case every
    channel is linearly resampled onto the uniform grid.
    """
    if hasattr(source, "read"):
        rows = list(csv.reader(source))
        name = getattr(source, "name", "<stream>")
    else:
        name = str(source)
        with open(source, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))

    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ValidationError(f"{name}: empty file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise ValidationError(f"{name}: need a time column and at least one channel")
    if len(set(header)) != len(header):
        raise ValidationError(f"{name}: duplicate column names in header {header}")
    data_rows = rows[1:]
    if len(data_rows) < 2:
        raise ValidationError(f"{name}: need at least 2 data rows, got {len(data_rows)}")

    values = np.empty((len(data_rows), len(header)))
    for i, row in enumerate(data_rows):
        line_no = i + 2  # 1-based, after the header
        if len(row) != len(header):
            raise ValidationError(
                f"{name}: line {line_no}: expected {len(header)} cells, got {len(row)}"
            )
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ValidationError(
                    f"{name}: line {line_no}: non-numeric value {cell.strip()!r} "
                    f"in column {header[j]!r}"
                ) from None

    t = values[:, 0]
    deltas = np.diff(t)
    if np.any(deltas <= 0):
        bad = int(np.argmax(deltas <= 0))
        raise ValidationError(f"{name}: line {bad + 3}: time column is not strictly increasing")
    dt = float(np.median(deltas))
    jitter = float(np.max(np.abs(deltas - dt)))
    if jitter > jitter_tol * dt:
        if not resample:
            raise ValidationError(
                f"{name}: timestamp jitter {jitter:.3g} s exceeds {jitter_tol:.0%} of dt={dt:.3g} s; "
                f"pass resample=True (--resample) to interpolate onto a uniform grid"
            )
        n = int(math.floor((t[-1] - t[0]) / dt)) + 1
        grid = t[0] + np.arange(n) * dt
        out = {}
        for j, col in enumerate(header[1:], start=1):
            out[col] = TimeSeries(dt, np.interp(grid, t, values[:, j]), float(t[0]))
        return out

    return {
        col: TimeSeries(dt, values[:, j], float(t[0]))
        for j, col in enumerate(header[1:], start=1)
    }


def write_recording_csv(destination, channels: Mapping[str, TimeSeries]) -> None:
    """Write channels sharing one grid as a recording CSV (t_s first)."""
    series = list(channels.values())
    if not series:
        raise ValidationError("no channels to write")
    n = len(series[0])
    if any(len(ts) != n or not math.isclose(ts.dt_s, series[0].dt_s, rel_tol=1e-12) for ts in series):
        raise ValidationError("all channels must share dt and length")
    t = series[0].times
    with _open_text(destination) as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s"] + list(channels.keys()))
        for i in range(n):
            writer.writerow([repr(float(t[i]))] + [repr(float(ts.samples[i])) for ts in channels.values()])


# ---------------------------------------------------------------------------
# Sweep orchestration

def _noise_seed(cfg: ExperimentConfig, freq_i: int, path_i: int, channel: int) -> int:
    ss = np.random.SeedSequence([cfg.seed, cfg.noise.seed, freq_i, path_i, channel])
    return int(ss.generate_state(1)[0])


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Synthesize, simulate, and analyze every (frequency, path) point.

    Each point drives one terminal with a sine of cfg.drive_periods periods
    (after a settle prefix of cfg.settle_s that is discarded before
    analysis), then reports harmonics, THD, and the fuzzy category for every
    differential channel.  V2/V3 ratios are normalized to the reference
    frequency with the configured exclusions omitted.
    """
    entries: List[SweepEntry] = []
    reports_by_group: Dict[Tuple[str, int], Dict[float, HarmonicReport]] = {}
    records: List[Tuple[float, str, int, HarmonicReport, Classification]] = []

    settle_n = int(round(cfg.settle_s / cfg.sim.dt_s))
    for path_i, path in enumerate(cfg.paths):
        terminal = PATH_TERMINALS[path]
        for freq_i, f in enumerate(cfg.sweep_hz):
            record_n = int(round(cfg.drive_periods / (f * cfg.sim.dt_s)))
            duration = (record_n + settle_n) * cfg.sim.dt_s
            drive = synthesize(WaveformSpec("sine", f, cfg.drive_vpp_v), cfg.sim.dt_s, duration)
            try:
                outs = simulate(cfg.topology, {terminal: drive}, cfg.sim)
            except SimulationError as exc:
                raise SimulationError(f"sweep point freq={f} Hz {path}: {exc}") from exc
            for channel, ts in sorted(outs.items()):
                rec = TimeSeries(ts.dt_s, ts.samples[-record_n:], ts.t0_s + settle_n * ts.dt_s)
                if cfg.noise.rms_v > 0:
                    spec = replace(cfg.noise, seed=_noise_seed(cfg, freq_i, path_i, channel))
                    rec = add_endogenous_noise(rec, spec)
                sp = amplitude_spectrum(rec, cfg.analysis.window)
                rep = harmonic_report(sp, f, cfg.analysis.k_max, cfg.analysis.tol_bins)
                cls = classify(cfg.partition, rep.thd_f * 100.0)
                records.append((f, path, channel, rep, cls))
                reports_by_group.setdefault((path, channel), {})[f] = rep

    normalized: Dict[Tuple[str, int], Dict[float, float]] = {}
    for group, reports in reports_by_group.items():
        normalized[group] = normalized_ratio_series(
            reports, cfg.analysis.ref_freq_hz, cfg.analysis.exclusions
        )

    for f, path, channel, rep, cls in records:
        norm = normalized[(path, channel)].get(f)
        entries.append(
            SweepEntry(
                freq_hz=f,
                path=path,
                channel=channel,
                report=rep,
                label=cls.label,
                memberships=dict(cls.memberships),
                normalized_ratio=norm,
            )
        )

    entries.sort(key=lambda e: (e.freq_hz, e.path, e.channel))
    return SweepResult(tuple(entries), config_hash(cfg), cfg.seed)


# ---------------------------------------------------------------------------
# Report emission

class _open_text:
    """Context manager accepting a path or an already-open text stream."""

    def __init__(self, destination):
        self.destination = destination
        self.fh = None
        self.owns = False

    def __enter__(self):
        if hasattr(self.destination, "write"):
            self.fh = self.destination
        else:
            self.fh = open(self.destination, "w", encoding="utf-8", newline="")
            self.owns = True
        return self.fh

    def __exit__(self, *exc):
        if self.owns:
            self.fh.close()
        return False


def _entry_to_dict(e: SweepEntry) -> dict:
    return {
        "freq_hz": e.freq_hz,
        "path": e.path,
        "channel": e.channel,
        "harmonics_v": [float(v) for v in e.report.harmonics_v],
        "thd_f": e.report.thd_f,
        "thd_r": e.report.thd_r,
        "ratio_2_3": e.report.ratio_2_3,
        "normalized_ratio": e.normalized_ratio,
        "label": e.label,
        "memberships": e.memberships,
    }


def _entry_from_dict(d: dict) -> SweepEntry:
    harmonics = np.array(d["harmonics_v"], dtype=float)
    rep = HarmonicReport(d["freq_hz"], harmonics, d["thd_f"], d["thd_r"], d["ratio_2_3"])
    return SweepEntry(
        freq_hz=d["freq_hz"],
        path=d["path"],
        channel=d["channel"],
        report=rep,
        label=d["label"],
        memberships=dict(d["memberships"]),
        normalized_ratio=d["normalized_ratio"],
    )


def sweep_result_to_dict(result: SweepResult, timestamp: Optional[str] = None) -> dict:
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat()
    return {
        "provenance": {
            "config_hash": result.config_hash,
            "seed": result.seed,
            "tool_version": result.tool_version,
            "generated_at": timestamp,
        },
        "entries": [_entry_to_dict(e) for e in result.entries],
    }


def sweep_result_from_dict(d: dict) -> SweepResult:
    prov = d["provenance"]
    return SweepResult(
        entries=tuple(_entry_from_dict(e) for e in d["entries"]),
        config_hash=prov["config_hash"],
        seed=prov["seed"],
        tool_version=prov["tool_version"],
    )


def load_sweep_json(path) -> SweepResult:
    with open(path, "r", encoding="utf-8") as fh:
        return sweep_result_from_dict(json.load(fh))


def _mix_report_to_dict(f2_hz: float, report: MixReport) -> dict:
    return {
        "f2_hz": f2_hz,
        "predicted": [
            {"m": p.m, "n": p.n, "sign": p.sign, "freq_hz": p.freq_hz, "order": p.order}
            for p in report.predicted
        ],
        "matched": [
            {
                "product": {
                    "m": m.product.m,
                    "n": m.product.n,
                    "sign": m.product.sign,
                    "freq_hz": m.product.freq_hz,
                    "order": m.product.order,
                },
                "observed_freq_hz": m.observed_freq_hz,
                "amplitude_v": m.amplitude_v,
            }
            for m in report.matched
        ],
        "unmatched_peaks": [
            {"freq_hz": p.freq_hz, "amplitude_v": p.amplitude_v, "prominence_v": p.prominence_v}
            for p in report.unmatched_peaks
        ],
    }


_SWEEP_FIXED_COLUMNS = ("thd_f", "thd_r", "ratio_2_3", "normalized_ratio", "label")


def _emit_sweep_csv(result: SweepResult, fh) -> None:
    k = max((e.report.k for e in result.entries), default=0)
    writer = csv.writer(fh)
    writer.writerow(
        ["f_hz", "path", "channel"]
        + [f"V{i}" for i in range(1, k + 1)]
        + list(_SWEEP_FIXED_COLUMNS)
    )
    for e in result.entries:
        harmonics = [repr(float(v)) for v in e.report.harmonics_v]
        harmonics += [""] * (k - e.report.k)
        writer.writerow(
            [repr(e.freq_hz), e.path, e.channel]
            + harmonics
            + [
                repr(e.report.thd_f),
                repr(e.report.thd_r),
                repr(e.report.ratio_2_3),
                "" if e.normalized_ratio is None else repr(e.normalized_ratio),
                e.label,
            ]
        )


def _emit_mix_csv(reports: Mapping[float, MixReport], fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(
        ["f2_hz", "record_type", "m", "n", "sign", "order",
         "freq_hz", "observed_freq_hz", "amplitude_v", "prominence_v"]
    )
    for f2 in sorted(reports):
        rep = reports[f2]
        for p in rep.predicted:
            writer.writerow([repr(f2), "predicted", p.m, p.n, p.sign, p.order,
                             repr(p.freq_hz), "", "", ""])
        for m in rep.matched:
            writer.writerow([repr(f2), "matched", m.product.m, m.product.n, m.product.sign,
                             m.product.order, repr(m.product.freq_hz),
                             repr(m.observed_freq_hz), repr(m.amplitude_v), ""])
        for p in rep.unmatched_peaks:
            writer.writerow([repr(f2), "unmatched", "", "", "", "",
                             "", repr(p.freq_hz), repr(p.amplitude_v), repr(p.prominence_v)])


def emit_report(
    result: Union[SweepResult, MixReport, Mapping[float, MixReport]],
    format: str,
    destination,
    timestamp: Optional[str] = None,
) -> None:
    """Write a SweepResult or mixing report(s) as CSV or JSON."""
    if format not in ("csv", "json"):
        raise ValidationError(f"format must be csv or json, got {format!r}")

    if isinstance(result, MixReport):
        result = {0.0: result}

    with _open_text(destination) as fh:
        if isinstance(result, SweepResult):
            if format == "json":
                json.dump(sweep_result_to_dict(result, timestamp), fh, indent=2)
                fh.write("\n")
            else:
                _emit_sweep_csv(result, fh)
        else:
            if format == "json":
                doc = {"reports": [_mix_report_to_dict(f2, result[f2]) for f2 in sorted(result)]}
                json.dump(doc, fh, indent=2)
                fh.write("\n")
            else:
                _emit_mix_csv(result, fh)


def run_mixing_from_config(
    cfg: ExperimentConfig,
    f2_list_hz: Sequence[float] = (0.002, 0.005, 0.007),
    base_f1_hz: float = 0.001,
    channel: int = 0,
) -> Dict[float, MixReport]:
    """Mixing experiment wired to the experiment config's network and solver."""
    return run_mixing_experiment(
        cfg.topology,
        None,
        f2_list_hz=f2_list_hz,
        base_f1_hz=base_f1_hz,
        cfg=cfg.sim,
        vpp_v=cfg.drive_vpp_v,
        channel=channel,
        settle_s=cfg.settle_s,
        periods=cfg.drive_periods,
    )
