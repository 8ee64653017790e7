"""Windowed amplitude spectra, harmonic extraction, THD, and peak detection.

Amplitude estimation follows the usual recipe for tone measurement: subtract
the mean, apply a Blackman (or rectangular) window, zero-pad to a power of
two, and correct the single-sided magnitudes by the window's coherent gain.
Harmonic amplitudes are read as the local maximum around each expected bin so
that slightly off-bin fundamentals are still measured at the mainlobe peak.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks

from .errors import ValidationError
from .signals import TimeSeries

WINDOW_KINDS = ("rectangular", "blackman")

DEFAULT_K_MAX = 10
DEFAULT_TOL_BINS = 2


@dataclass(frozen=True)
class Spectrum:
    """Single-sided amplitude spectrum.

    amplitudes_v are window-gain-corrected volts; n_samples is the transform
    length (after zero-padding), so bin k sits at k * df_hz.
    """

    df_hz: float
    amplitudes_v: np.ndarray
    n_samples: int
    window: str

    def __post_init__(self):
        if not (self.df_hz > 0):
            raise ValidationError(f"df_hz must be positive, got {self.df_hz}")
        if self.window not in WINDOW_KINDS:
            raise ValidationError(f"window must be one of {WINDOW_KINDS}, got {self.window!r}")
        amps = np.asarray(self.amplitudes_v, dtype=float)
        if amps.size != self.n_samples // 2 + 1:
            raise ValidationError(
                f"amplitudes length {amps.size} != n_samples//2+1 = {self.n_samples // 2 + 1}"
            )
        if np.any(amps < 0):
            raise ValidationError("amplitudes must be nonnegative")
        object.__setattr__(self, "amplitudes_v", amps)

    @property
    def freqs_hz(self) -> np.ndarray:
        return np.arange(self.amplitudes_v.size) * self.df_hz

    @property
    def nyquist_hz(self) -> float:
        return self.df_hz * (self.n_samples / 2.0)


@dataclass(frozen=True)
class HarmonicReport:
    """Per-fundamental harmonic amplitudes with THD figures.

    harmonics_v holds V1..Vk (V1 = fundamental).  ratio_2_3 is V2/V3; it is
    +inf when V3 is exactly zero and nan when fewer than three harmonics fit
    below Nyquist.
    """

    f0_hz: float
    harmonics_v: np.ndarray
    thd_f: float
    thd_r: float
    ratio_2_3: float

    def __post_init__(self):
        if not (self.f0_hz > 0):
            raise ValidationError(f"f0_hz must be positive, got {self.f0_hz}")
        harm = np.asarray(self.harmonics_v, dtype=float)
        if harm.size < 2:
            raise ValidationError("need at least 2 harmonics for a populated report")
        expected_r = self.thd_f / math.sqrt(1.0 + self.thd_f**2)
        if abs(self.thd_r - expected_r) > 1e-12:
            raise ValidationError(
                f"thd_r={self.thd_r} inconsistent with thd_f={self.thd_f}"
            )
        object.__setattr__(self, "harmonics_v", harm)

    @property
    def k(self) -> int:
        return int(self.harmonics_v.size)


@dataclass(frozen=True)
class SpectralPeak:
    freq_hz: float
    amplitude_v: float
    prominence_v: float


@dataclass(frozen=True)
class PeakList:
    peaks: Tuple[SpectralPeak, ...]

    def __post_init__(self):
        freqs = [p.freq_hz for p in self.peaks]
        if any(f2 <= f1 for f1, f2 in zip(freqs, freqs[1:])):
            raise ValidationError("peak frequencies must be strictly increasing")
        if any(p.prominence_v < 0 for p in self.peaks):
            raise ValidationError("peak prominence must be nonnegative")

    def __len__(self) -> int:
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    @property
    def freqs_hz(self) -> np.ndarray:
        return np.array([p.freq_hz for p in self.peaks])


def blackman_window(n: int) -> np.ndarray:
    """Classic Blackman weights 0.42 - 0.5 cos + 0.08 cos(2·), length n."""
    if n < 2:
        raise ValidationError(f"window length must be >= 2, got {n}")
    j = np.arange(n)
    theta = 2.0 * math.pi * j / (n - 1)
    # This grouping makes the endpoint zeros and the odd-n center value of
    # 1.0 exact in binary floating point (0.42 + 0.08 rounds to 0.5).
    w = (0.42 + 0.08 * np.cos(2.0 * theta)) - 0.5 * np.cos(theta)
    w = 0.5 * (w + w[::-1])
    w[0] = 0.0
    w[-1] = 0.0
    return w


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def amplitude_spectrum(ts: TimeSeries, window: str = "blackman") -> Spectrum:
    """Single-sided, coherent-gain-corrected amplitude spectrum.

    The mean is subtracted before windowing (large DC offsets otherwise leak
    across the low-frequency bins), and the windowed record is zero-padded to
    the next power of two.  Bin 0 and the Nyquist bin carry |X|/sum(w); all
    other bins 2|X|/sum(w).
    """
    if window not in WINDOW_KINDS:
        raise ValidationError(f"window must be one of {WINDOW_KINDS}, got {window!r}")
    n = len(ts)
    if n < 8:
        raise ValidationError(f"series too short for a spectrum: {n} samples (need >= 8)")

    x = ts.samples - ts.samples.mean()
    if window == "blackman":
        w = blackman_window(n)
    else:
        w = np.ones(n)
    n_fft = _next_pow2(n)
    spec = np.fft.rfft(x * w, n_fft)
    amps = 2.0 * np.abs(spec) / w.sum()
    amps[0] *= 0.5
    if n_fft % 2 == 0:
        amps[-1] *= 0.5
    return Spectrum(1.0 / (n_fft * ts.dt_s), amps, n_fft, window)


def harmonic_amplitudes(
    sp: Spectrum, f0_hz: float, k_max: int = DEFAULT_K_MAX, tol_bins: int = DEFAULT_TOL_BINS
) -> np.ndarray:
    """Amplitudes V1..Vk read at multiples of f0_hz.

    Vn is the maximum amplitude within +-tol_bins of the bin nearest n*f0_hz.
    Harmonics at or beyond Nyquist are dropped, so the result may be shorter
    than k_max.
    """
    if not (f0_hz > 0):
        raise ValidationError(f"f0_hz must be positive, got {f0_hz}")
    if f0_hz < sp.df_hz:
        raise ValidationError(f"f0_hz={f0_hz} below bin width df_hz={sp.df_hz}")
    if k_max < 1:
        raise ValidationError(f"k_max must be >= 1, got {k_max}")
    if tol_bins < 0:
        raise ValidationError(f"tol_bins must be >= 0, got {tol_bins}")

    amps = sp.amplitudes_v
    out = []
    for k in range(1, k_max + 1):
        fk = k * f0_hz
        if fk >= sp.nyquist_hz:
            break
        center = int(round(fk / sp.df_hz))
        lo = max(center - tol_bins, 0)
        hi = min(center + tol_bins, amps.size - 1)
        out.append(float(amps[lo : hi + 1].max()))
    if not out:
        raise ValidationError(f"fundamental f0_hz={f0_hz} at or beyond Nyquist {sp.nyquist_hz}")
    return np.array(out)


def thd(harmonics: Sequence[float]) -> Tuple[float, float]:
    """(THD_F, THD_R) from harmonic amplitudes V1..Vk.

    THD_F is the RMS of V2..Vk over V1; THD_R = THD_F / sqrt(1 + THD_F^2)
    normalizes it into [0, 1).
    """
    v = np.asarray(harmonics, dtype=float)
    if v.size < 2:
        raise ValidationError(f"need at least 2 harmonics, got {v.size}")
    if not (v[0] > 0):
        raise ValidationError("fundamental amplitude V1 must be positive")
    thd_f = float(math.sqrt(float(np.sum(v[1:] ** 2))) / v[0])
    thd_r = thd_f / math.sqrt(1.0 + thd_f**2)
    return thd_f, thd_r


def harmonic_report(
    sp: Spectrum, f0_hz: float, k_max: int = DEFAULT_K_MAX, tol_bins: int = DEFAULT_TOL_BINS
) -> HarmonicReport:
    """Extract harmonics and assemble the THD/ratio summary for one record."""
    v = harmonic_amplitudes(sp, f0_hz, k_max, tol_bins)
    thd_f, thd_r = thd(v)
    if v.size >= 3:
        ratio = float(v[1] / v[2]) if v[2] > 0 else math.inf
    else:
        ratio = math.nan
    return HarmonicReport(f0_hz, v, thd_f, thd_r, ratio)


def _lookup_close(keys: Iterable[float], target: float) -> float | None:
    for k in keys:
        if math.isclose(k, target, rel_tol=1e-9, abs_tol=1e-15):
            return k
    return None


def normalized_ratio_series(
    reports: Mapping[float, HarmonicReport],
    ref_freq_hz: float,
    exclusions: Iterable[float] = (),
) -> Dict[float, float]:
    """V2/V3 ratios normalized to the ratio at the reference frequency.

    Frequencies listed in exclusions are omitted from the output (outlier
    handling).  Every included report must have V3 > 0.
    """
    exclusions = tuple(exclusions)
    ref_key = _lookup_close(reports.keys(), ref_freq_hz)
    if ref_key is None:
        raise ValidationError(f"reference frequency {ref_freq_hz} not present in reports")
    ref = reports[ref_key]
    if ref.k < 3 or not (ref.harmonics_v[2] > 0):
        raise ValidationError(f"zero V3 at reference frequency {ref_freq_hz}")

    out: Dict[float, float] = {}
    for f in sorted(reports.keys()):
        if _lookup_close(exclusions, f) is not None:
            continue
        rep = reports[f]
        if rep.k < 3 or not (rep.harmonics_v[2] > 0):
            raise ValidationError(f"zero V3 at frequency {f}")
        out[f] = rep.ratio_2_3 / ref.ratio_2_3
    return out


def detect_peaks(
    sp: Spectrum, min_prominence_v: float = 0.0, exclude_below_hz: float = 0.0
) -> PeakList:
    """Local spectral maxima with at least the requested prominence."""
    if min_prominence_v < 0:
        raise ValidationError(f"min_prominence_v must be >= 0, got {min_prominence_v}")
    idx, props = find_peaks(sp.amplitudes_v, prominence=(min_prominence_v, None))
    peaks = []
    for i, prom in zip(idx, props["prominences"]):
        f = i * sp.df_hz
        if f > exclude_below_hz:
            peaks.append(SpectralPeak(float(f), float(sp.amplitudes_v[i]), float(prom)))
    return PeakList(tuple(peaks))
