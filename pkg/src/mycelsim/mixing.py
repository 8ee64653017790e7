"""Two-tone intermodulation: product prediction, simulation, peak matching."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ValidationError
from .netsim import DualTransportParams, Edge, NetworkTopology, SimConfig, simulate
from .signals import TimeSeries, WaveformSpec, synthesize
from .spectral import PeakList, amplitude_spectrum, detect_peaks

DEFAULT_MAX_ORDER = 4
DEFAULT_F2_LIST_HZ = (0.002, 0.005, 0.007)
DEFAULT_BASE_F1_HZ = 0.001

# Peaks below this fraction of the spectrum maximum are treated as floor;
# the absolute term keeps a silent channel from reporting float dust.
PEAK_PROMINENCE_REL = 1e-3
PEAK_FLOOR_V = 1e-12


@dataclass(frozen=True)
class MixSpec:
    """Two-tone drive: f1 on path 1, f2 on path 2."""

    f1_hz: float
    f2_hz: float
    vpp1_v: float = 10.0
    vpp2_v: float = 10.0

    def __post_init__(self):
        if not (self.f1_hz > 0 and self.f2_hz > 0):
            raise ValidationError("mixing frequencies must be positive")
        if self.vpp1_v < 0 or self.vpp2_v < 0:
            raise ValidationError("drive amplitudes must be nonnegative")


@dataclass(frozen=True)
class IntermodProduct:
    """|m*f1 +- n*f2| with order m + n."""

    m: int
    n: int
    sign: str  # "plus" | "minus"
    freq_hz: float
    order: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0 or (self.m == 0 and self.n == 0):
            raise ValidationError(f"invalid coefficients m={self.m}, n={self.n}")
        if self.sign not in ("plus", "minus"):
            raise ValidationError(f"sign must be plus or minus, got {self.sign!r}")
        if self.order != self.m + self.n:
            raise ValidationError(f"order {self.order} != m+n = {self.m + self.n}")
        if self.freq_hz < 0:
            raise ValidationError("product frequency must be nonnegative")

    def frequency_from(self, f1_hz: float, f2_hz: float) -> float:
        term = self.n * f2_hz if self.sign == "plus" else -self.n * f2_hz
        return abs(self.m * f1_hz + term)


@dataclass(frozen=True)
class MatchedPeak:
    product: IntermodProduct
    observed_freq_hz: float
    amplitude_v: float


@dataclass(frozen=True)
class MixReport:
    predicted: Tuple[IntermodProduct, ...]
    matched: Tuple[MatchedPeak, ...]
    unmatched_peaks: PeakList

    def matched_orders(self) -> Tuple[int, ...]:
        return tuple(m.product.order for m in self.matched)

    def matched_near(self, freq_hz: float, tol_hz: float) -> Tuple[MatchedPeak, ...]:
        return tuple(
            m for m in self.matched if abs(m.product.freq_hz - freq_hz) <= tol_hz
        )


def predict_products(f1_hz: float, f2_hz: float, max_order: int = DEFAULT_MAX_ORDER) -> List[IntermodProduct]:
    """All distinct |m*f1 +- n*f2| up to the requested order, ascending.

    Coincident frequencies keep their lowest-order interpretation (the
    dominant contribution for weak nonlinearity); zero-frequency products
    are dropped.
    """
    if not (f1_hz > 0 and f2_hz > 0):
        raise ValidationError("mixing frequencies must be positive")
    if max_order < 1:
        raise ValidationError(f"max_order must be >= 1, got {max_order}")

    candidates: List[IntermodProduct] = []
    for m in range(0, max_order + 1):
        for n in range(0, max_order + 1 - m):
            if m == 0 and n == 0:
                continue
            signs = ("plus",) if (m == 0 or n == 0) else ("plus", "minus")
            for sign in signs:
                term = n * f2_hz if sign == "plus" else -n * f2_hz
                f = abs(m * f1_hz + term)
                if f <= 0:
                    continue
                candidates.append(IntermodProduct(m, n, sign, f, m + n))

    candidates.sort(key=lambda p: (p.freq_hz, p.order, p.m, p.n))
    out: List[IntermodProduct] = []
    for p in candidates:
        if out and math.isclose(out[-1].freq_hz, p.freq_hz, rel_tol=1e-9, abs_tol=1e-15):
            continue
        out.append(p)
    return out


def match_products(
    peaks: PeakList, products: Sequence[IntermodProduct], tol_hz: float
) -> MixReport:
    """Pair observed peaks with the nearest predicted product within tol_hz."""
    if not (tol_hz > 0):
        raise ValidationError(f"tol_hz must be positive, got {tol_hz}")
    matched: List[MatchedPeak] = []
    unmatched = []
    for peak in peaks:
        best: Optional[IntermodProduct] = None
        best_key = None
        for prod in products:
            d = abs(prod.freq_hz - peak.freq_hz)
            if d > tol_hz:
                continue
            key = (d, prod.order)
            if best_key is None or key < best_key:
                best, best_key = prod, key
        if best is None:
            unmatched.append(peak)
        else:
            matched.append(MatchedPeak(best, peak.freq_hz, peak.amplitude_v))
    return MixReport(tuple(products), tuple(matched), PeakList(tuple(unmatched)))


def analyze_two_tone(
    top: NetworkTopology,
    spec: MixSpec,
    cfg: SimConfig,
    channel: int = 0,
    max_order: int = DEFAULT_MAX_ORDER,
    settle_s: float = 300.0,
    periods: int = 8,
) -> MixReport:
    """Simulate one two-tone drive and match the resulting satellites.

    The analyzed record is the final `periods` periods of the slower tone on
    the selected channel (a settle prefix of settle_s is discarded first);
    the matching tolerance is 1.5 bins of the resulting spectrum.
    """
    if not (0 <= channel < len(top.channels)):
        raise ValidationError(f"channel {channel} out of range for {len(top.channels)} channels")
    slow_hz = min(spec.f1_hz, spec.f2_hz)
    record_n = int(round(periods / (slow_hz * cfg.dt_s)))
    settle_n = int(round(settle_s / cfg.dt_s))
    duration = (record_n + settle_n) * cfg.dt_s

    drive1 = synthesize(WaveformSpec("sine", spec.f1_hz, spec.vpp1_v), cfg.dt_s, duration)
    drive2 = synthesize(WaveformSpec("sine", spec.f2_hz, spec.vpp2_v), cfg.dt_s, duration)
    outs = simulate(top, {"input1": drive1, "input2": drive2}, cfg)
    rec = outs[channel]
    tail = TimeSeries(rec.dt_s, rec.samples[-record_n:], rec.t0_s + settle_n * rec.dt_s)
    sp = amplitude_spectrum(tail, "blackman")
    floor = max(PEAK_PROMINENCE_REL * float(sp.amplitudes_v.max()), PEAK_FLOOR_V)
    peaks = detect_peaks(sp, min_prominence_v=floor, exclude_below_hz=sp.df_hz)
    products = predict_products(spec.f1_hz, spec.f2_hz, max_order)
    return match_products(peaks, products, tol_hz=1.5 * sp.df_hz)


def run_mixing_experiment(
    top: NetworkTopology,
    params: Optional[DualTransportParams],
    f2_list_hz: Sequence[float] = DEFAULT_F2_LIST_HZ,
    base_f1_hz: float = DEFAULT_BASE_F1_HZ,
    cfg: SimConfig = SimConfig(),
    vpp_v: float = 10.0,
    channel: int = 0,
    max_order: int = DEFAULT_MAX_ORDER,
    settle_s: float = 300.0,
    periods: int = 8,
) -> Dict[float, MixReport]:
    """Drive both paths simultaneously for each f2 and match the products.

    Path 1 carries the base tone, path 2 takes each entry of f2_list_hz in
    turn.  When params is given it overrides every edge's transport law
    (handy for linear-control runs).
    """
    if params is not None:
        top = NetworkTopology(
            node_count=top.node_count,
            edges=tuple(Edge(e.node_a, e.node_b, params) for e in top.edges),
            terminals=top.terminals,
            channels=top.channels,
        )
    reports: Dict[float, MixReport] = {}
    for f2 in f2_list_hz:
        spec = MixSpec(f1_hz=base_f1_hz, f2_hz=f2, vpp1_v=vpp_v, vpp2_v=vpp_v)
        reports[f2] = analyze_two_tone(
            top, spec, cfg, channel=channel, max_order=max_order,
            settle_s=settle_s, periods=periods,
        )
    return reports
