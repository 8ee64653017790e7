import math

import pytest

from mycelsim.errors import ValidationError
from mycelsim.mixing import (
    IntermodProduct,
    MixSpec,
    analyze_two_tone,
    match_products,
    predict_products,
    run_mixing_experiment,
)
from mycelsim.netsim import DualTransportParams, SimConfig, default_topology
from mycelsim.spectral import PeakList, SpectralPeak


def freq_set(products, tol=1e-12):
    return sorted(p.freq_hz for p in products)


def contains(products, freq_hz):
    return any(math.isclose(p.freq_hz, freq_hz, rel_tol=1e-9) for p in products)


class TestPredictProducts:
    def test_paper_satellites_for_5mhz(self):
        prods = predict_products(0.001, 0.005, max_order=3)
        assert contains(prods, 0.009)  # 2*f2 - f1
        assert contains(prods, 0.011)  # 2*f2 + f1

    def test_satellites_for_7mhz(self):
        prods = predict_products(0.001, 0.007, max_order=3)
        assert contains(prods, 0.013)
        assert contains(prods, 0.015)

    def test_equal_tones_collapse_to_harmonics(self):
        prods = predict_products(0.004, 0.004, max_order=3)
        assert freq_set(prods) == pytest.approx([0.004, 0.008, 0.012])

    def test_sorted_unique_ascending(self):
        prods = predict_products(0.001, 0.005, max_order=4)
        freqs = [p.freq_hz for p in prods]
        assert freqs == sorted(freqs)
        assert all(b - a > 1e-12 for a, b in zip(freqs, freqs[1:]))

    def test_symmetric_in_f1_f2(self):
        a = freq_set(predict_products(0.001, 0.005, 4))
        b = freq_set(predict_products(0.005, 0.001, 4))
        assert a == pytest.approx(b)

    def test_every_product_recomputable(self):
        for p in predict_products(0.0013, 0.0057, 4):
            assert p.frequency_from(0.0013, 0.0057) == pytest.approx(p.freq_hz, rel=1e-12)
            assert p.order == p.m + p.n >= 1

    def test_dedup_keeps_lowest_order(self):
        # 3 mHz is both f1+f2 (order 2) and 3*f1 (order 3)
        prods = predict_products(0.001, 0.002, max_order=3)
        at3 = [p for p in prods if math.isclose(p.freq_hz, 0.003, rel_tol=1e-9)]
        assert len(at3) == 1 and at3[0].order == 2

    def test_zero_frequency_excluded(self):
        prods = predict_products(0.002, 0.002, max_order=2)
        assert all(p.freq_hz > 0 for p in prods)

    def test_validation(self):
        with pytest.raises(ValidationError):
            predict_products(0.0, 0.005, 3)
        with pytest.raises(ValidationError):
            predict_products(0.001, 0.005, 0)
        with pytest.raises(ValidationError):
            IntermodProduct(0, 0, "plus", 0.0, 0)


class TestMatchProducts:
    def test_empty_peaks(self):
        prods = predict_products(0.001, 0.005, 3)
        report = match_products(PeakList(()), prods, tol_hz=1e-4)
        assert report.matched == ()
        assert tuple(report.predicted) == tuple(prods)
        assert len(report.unmatched_peaks) == 0

    def test_exact_peaks_all_match(self):
        prods = predict_products(0.001, 0.005, 2)
        peaks = PeakList(tuple(SpectralPeak(p.freq_hz, 1.0, 1.0) for p in prods))
        report = match_products(peaks, prods, tol_hz=1e-6)
        assert len(report.matched) == len(prods)
        assert len(report.unmatched_peaks) == 0

    def test_far_peak_unmatched(self):
        prods = predict_products(0.001, 0.005, 2)
        peaks = PeakList((SpectralPeak(0.1, 1.0, 1.0),))
        report = match_products(peaks, prods, tol_hz=1e-4)
        assert len(report.matched) == 0
        assert len(report.unmatched_peaks) == 1

    def test_tie_prefers_lower_order(self):
        products = [
            IntermodProduct(1, 2, "plus", 0.01, 3),
            IntermodProduct(1, 0, "plus", 0.01, 1),
        ]
        peaks = PeakList((SpectralPeak(0.01, 1.0, 1.0),))
        report = match_products(peaks, products, tol_hz=1e-5)
        assert report.matched[0].product.order == 1

    def test_tol_validation(self):
        with pytest.raises(ValidationError):
            match_products(PeakList(()), [], tol_hz=0.0)


class TestMixingExperiment:
    @pytest.mark.parametrize("channel", [0, 1])
    def test_linear_network_does_not_mix(self, channel):
        # channel 0 nulls out entirely under uniform linear edges; channel 1
        # carries the two drive tones and nothing else
        linear = DualTransportParams(
            g_fast_S=2e-6, g_slow_S=0.0, alpha2_per_V=0.0, alpha3_per_V2=0.0, v_half_V=1.0
        )
        reports = run_mixing_experiment(
            default_topology(),
            linear,
            f2_list_hz=(0.005,),
            cfg=SimConfig(dt_s=1.0),
            settle_s=0.0,
            channel=channel,
        )
        rep = reports[0.005]
        assert all(m.product.order < 2 for m in rep.matched)
        if channel == 1:
            matched_freqs = sorted(m.product.freq_hz for m in rep.matched)
            assert matched_freqs == pytest.approx([0.001, 0.005])

    def test_default_network_mixes_5mhz(self):
        reports = run_mixing_experiment(
            default_topology(), None, f2_list_hz=(0.005,), cfg=SimConfig(dt_s=1.0)
        )
        rep = reports[0.005]
        matched_freqs = [m.product.freq_hz for m in rep.matched]
        assert any(math.isclose(f, 0.009, rel_tol=1e-6) for f in matched_freqs)
        assert any(math.isclose(f, 0.011, rel_tol=1e-6) for f in matched_freqs)

    def test_reports_keyed_by_f2(self):
        reports = run_mixing_experiment(
            default_topology(),
            None,
            f2_list_hz=(0.002, 0.005, 0.007),
            cfg=SimConfig(dt_s=1.0),
            periods=4,
        )
        assert sorted(reports) == [0.002, 0.005, 0.007]

    def test_channel_out_of_range(self):
        with pytest.raises(ValidationError):
            run_mixing_experiment(default_topology(), None, channel=7)

    def test_two_tone_spec_amplitudes_matter(self):
        # base at 1.3 mHz so its harmonics do not coincide with f2 products
        spec_full = MixSpec(0.0013, 0.005, vpp1_v=10.0, vpp2_v=10.0)
        spec_weak2 = MixSpec(0.0013, 0.005, vpp1_v=10.0, vpp2_v=0.0)
        cfg = SimConfig(dt_s=1.0)
        full = analyze_two_tone(default_topology(), spec_full, cfg, periods=8)
        weak = analyze_two_tone(default_topology(), spec_weak2, cfg, periods=8)

        def amp_at(report, freq):
            hits = [m.amplitude_v for m in report.matched
                    if math.isclose(m.product.freq_hz, freq, rel_tol=1e-9)]
            return max(hits, default=0.0)

        # with path 2 silent there is nothing at f2 or at 2*f2 - f1
        assert amp_at(full, 0.005) > 0.0
        assert amp_at(weak, 0.005) == 0.0
        assert amp_at(full, 2 * 0.005 - 0.0013) > 0.0
        assert amp_at(weak, 2 * 0.005 - 0.0013) == 0.0

    def test_mix_spec_validation(self):
        with pytest.raises(ValidationError):
            MixSpec(0.0, 0.005)
        with pytest.raises(ValidationError):
            MixSpec(0.001, 0.005, vpp1_v=-1.0)
