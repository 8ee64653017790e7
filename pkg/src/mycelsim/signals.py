"""Drive-waveform synthesis, endogenous background noise, and superposition."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

WAVEFORM_KINDS = ("sine", "square", "triangle")

# Band-limited noise is modeled as a fixed number of equal-amplitude,
# random-phase sinusoids on a uniform frequency grid inside the band.
NOISE_COMPONENTS = 64


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled voltage record.

    dt_s is the sample spacing in seconds, samples the voltages in volts,
    t0_s the time of the first sample.
    """

    dt_s: float
    samples: np.ndarray
    t0_s: float = 0.0

    def __post_init__(self):
        if not (self.dt_s > 0):
            raise ValidationError(f"dt_s must be positive, got {self.dt_s}")
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValidationError("samples must be one-dimensional with length >= 2")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size * self.dt_s

    @property
    def times(self) -> np.ndarray:
        return self.t0_s + np.arange(self.samples.size) * self.dt_s

    def with_samples(self, samples: np.ndarray) -> "TimeSeries":
        return TimeSeries(self.dt_s, samples, self.t0_s)


@dataclass(frozen=True)
class WaveformSpec:
    """Periodic drive waveform: kind, frequency, peak-to-peak amplitude."""

    kind: str
    frequency_hz: float
    amplitude_vpp: float
    phase_rad: float = 0.0
    dc_offset_v: float = 0.0

    def __post_init__(self):
        if self.kind not in WAVEFORM_KINDS:
            raise ValidationError(f"kind must be one of {WAVEFORM_KINDS}, got {self.kind!r}")
        if not (self.frequency_hz > 0):
            raise ValidationError(f"frequency_hz must be positive, got {self.frequency_hz}")
        if self.amplitude_vpp < 0:
            raise ValidationError(f"amplitude_vpp must be >= 0, got {self.amplitude_vpp}")


@dataclass(frozen=True)
class EndogenousNoiseSpec:
    """Band-limited background activity added to a recording."""

    band_low_hz: float = 0.05
    band_high_hz: float = 0.2
    rms_v: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.band_low_hz < self.band_high_hz):
            raise ValidationError(
                f"need 0 < band_low_hz < band_high_hz, got "
                f"({self.band_low_hz}, {self.band_high_hz})"
            )
        if self.rms_v < 0:
            raise ValidationError(f"rms_v must be >= 0, got {self.rms_v}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")


def _phase_fraction(spec: WaveformSpec, t: np.ndarray) -> np.ndarray:
    # Position within the period in [0, 1); keeps square/triangle transitions
    # exact when frequency_hz * dt_s is an exact binary fraction.
    return np.mod(spec.frequency_hz * t + spec.phase_rad / (2.0 * math.pi), 1.0)


def synthesize(spec: WaveformSpec, dt_s: float, duration_s: float) -> TimeSeries:
    """Sample a waveform on a uniform grid starting at t = 0.

    Requires dt_s below the Nyquist limit of the drive frequency and a
    duration of at least one full period.  Square and triangle waves are
    ideal (not band-limited) and share the sine's phase convention: all
    three rise through dc_offset_v at zero phase.
    """
    if not (dt_s > 0):
        raise ValidationError(f"dt_s must be positive, got {dt_s}")
    if not (duration_s > 0):
        raise ValidationError(f"duration_s must be positive, got {duration_s}")
    if dt_s >= 1.0 / (2.0 * spec.frequency_hz):
        raise ValidationError(
            f"dt_s={dt_s} violates Nyquist for frequency_hz={spec.frequency_hz} "
            f"(need dt_s < {1.0 / (2.0 * spec.frequency_hz)})"
        )
    if duration_s < 1.0 / spec.frequency_hz:
        raise ValidationError(
            f"duration_s={duration_s} is shorter than one period "
            f"({1.0 / spec.frequency_hz} s)"
        )

    n = int(round(duration_s / dt_s))
    t = np.arange(n) * dt_s
    p = _phase_fraction(spec, t)
    half = 0.5 * spec.amplitude_vpp

    if spec.kind == "sine":
        wave = np.sin(2.0 * math.pi * p)
    elif spec.kind == "square":
        wave = np.where(p < 0.5, 1.0, -1.0)
    else:  # triangle: rises 0 -> 1 over the first quarter period
        wave = np.where(p < 0.25, 4.0 * p, np.where(p < 0.75, 2.0 - 4.0 * p, 4.0 * p - 4.0))

    return TimeSeries(dt_s, spec.dc_offset_v + half * wave, 0.0)


def add_endogenous_noise(ts: TimeSeries, spec: EndogenousNoiseSpec) -> TimeSeries:
    """Add seeded band-limited noise to a copy of the series.

    The noise is a sum of NOISE_COMPONENTS equal-amplitude sinusoids on a
    uniform grid spanning [band_low_hz, band_high_hz], with phases drawn
    from the seeded generator and a total expected RMS of rms_v.
    """
    nyquist = 1.0 / (2.0 * ts.dt_s)
    if spec.band_high_hz >= nyquist:
        raise ValidationError(
            f"band_high_hz={spec.band_high_hz} is at or above Nyquist ({nyquist})"
        )
    if spec.rms_v == 0.0:
        return ts

    rng = np.random.default_rng(spec.seed)
    freqs = np.linspace(spec.band_low_hz, spec.band_high_hz, NOISE_COMPONENTS)
    phases = rng.uniform(0.0, 2.0 * math.pi, NOISE_COMPONENTS)
    amplitude = spec.rms_v * math.sqrt(2.0 / NOISE_COMPONENTS)
    t = ts.times
    noise = amplitude * np.sin(
        2.0 * math.pi * freqs[:, None] * t[None, :] + phases[:, None]
    ).sum(axis=0)
    return ts.with_samples(ts.samples + noise)


def superpose(a: TimeSeries, b: TimeSeries) -> TimeSeries:
    """Pointwise sum of two series on the same sampling grid."""
    if not math.isclose(a.dt_s, b.dt_s, rel_tol=1e-12):
        raise ValidationError(f"dt_s mismatch: {a.dt_s} vs {b.dt_s}")
    if len(a) != len(b):
        raise ValidationError(f"length mismatch: {len(a)} vs {len(b)}")
    return TimeSeries(a.dt_s, a.samples + b.samples, a.t0_s)
