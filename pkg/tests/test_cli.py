import csv
import json

import numpy as np
import pytest

from mycelsim.cli import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from mycelsim.pipeline import (
    AnalysisConfig,
    ExperimentConfig,
    ingest_csv,
    save_config,
)


@pytest.fixture
def tiny_config(tmp_path):
    cfg = ExperimentConfig(
        sweep_hz=(0.005, 0.01),
        paths=("path1",),
        analysis=AnalysisConfig(ref_freq_hz=0.01),
        settle_s=50.0,
    )
    path = tmp_path / "config.json"
    save_config(cfg, path)
    return path


class TestSynth:
    def test_writes_recording(self, tmp_path):
        out = tmp_path / "wave.csv"
        rc = main(
            ["synth", "--kind", "sine", "--freq-hz", "0.01", "--vpp", "4",
             "--duration-s", "400", "--out", str(out)]
        )
        assert rc == EXIT_OK
        rec = ingest_csv(out)
        assert np.max(np.abs(rec["v"].samples)) == pytest.approx(2.0, rel=1e-3)

    def test_noise_is_seeded(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["synth", "--freq-hz", "0.01", "--duration-s", "300",
                "--noise-rms", "0.1", "--seed", "5"]
        assert main(args + ["--out", str(a)]) == EXIT_OK
        assert main(args + ["--out", str(b)]) == EXIT_OK
        assert a.read_text() == b.read_text()

    def test_nyquist_error_is_validation(self, tmp_path):
        rc = main(["synth", "--freq-hz", "0.7", "--dt-s", "1", "--duration-s", "100",
                   "--out", str(tmp_path / "x.csv")])
        assert rc == EXIT_VALIDATION


class TestSimulateAnalyze:
    def test_simulate_then_analyze(self, tmp_path, tiny_config):
        rec = tmp_path / "rec.csv"
        rc = main(["simulate", "--config", str(tiny_config), "--freq-hz", "0.005",
                   "--out", str(rec)])
        assert rc == EXIT_OK
        channels = ingest_csv(rec)
        assert sorted(channels) == ["ch0", "ch1"]

        report = tmp_path / "report.json"
        rc = main(["analyze", str(rec), "--f0-hz", "0.005", "--format", "json",
                   "--out", str(report)])
        assert rc == EXIT_OK
        doc = json.loads(report.read_text())
        assert {r["channel"] for r in doc["reports"]} == {"ch0", "ch1"}
        for r in doc["reports"]:
            assert r["thd_f"] > 0
            assert r["label"]

    def test_analyze_csv_format(self, tmp_path, tiny_config):
        rec = tmp_path / "rec.csv"
        main(["simulate", "--config", str(tiny_config), "--freq-hz", "0.005", "--out", str(rec)])
        out = tmp_path / "report.csv"
        rc = main(["analyze", str(rec), "--f0-hz", "0.005", "--format", "csv", "--out", str(out)])
        assert rc == EXIT_OK
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 2
        assert float(rows[0]["thd_f"]) > 0

    def test_missing_recording_is_io_error(self):
        assert main(["analyze", "/nonexistent/rec.csv", "--f0-hz", "0.01"]) == EXIT_IO

    def test_analyze_single_channel_and_window(self, tmp_path, tiny_config):
        rec = tmp_path / "rec.csv"
        main(["simulate", "--config", str(tiny_config), "--freq-hz", "0.005", "--out", str(rec)])
        out = tmp_path / "one.json"
        rc = main(["analyze", str(rec), "--f0-hz", "0.005", "--channel", "ch1",
                   "--window", "rectangular", "--format", "json", "--out", str(out)])
        assert rc == EXIT_OK
        doc = json.loads(out.read_text())
        assert [r["channel"] for r in doc["reports"]] == ["ch1"]

    def test_analyze_unknown_channel_is_validation(self, tmp_path, tiny_config):
        rec = tmp_path / "rec.csv"
        main(["simulate", "--config", str(tiny_config), "--freq-hz", "0.005", "--out", str(rec)])
        assert main(["analyze", str(rec), "--f0-hz", "0.005", "--channel", "nope"]) == EXIT_VALIDATION

    def test_newton_failure_exit_code(self, tmp_path):
        # absurd cubic coefficient and a single Newton iteration
        cfg = ExperimentConfig(
            sweep_hz=(0.01,),
            paths=("path1",),
            analysis=AnalysisConfig(ref_freq_hz=0.01),
        )
        from dataclasses import replace

        from mycelsim.netsim import DualTransportParams, Edge, NetworkTopology, SimConfig, Terminals

        p = DualTransportParams(1e-6, 0.0, 60.0, 0.0, 50.0, 1.0)
        top = NetworkTopology(
            4,
            (Edge(0, 2, p), Edge(2, 3, p), Edge(1, 2, p)),
            Terminals(0, 1, 3),
            ((2, 3),),
        )
        cfg = replace(cfg, topology=top, sim=SimConfig(newton_max_iter=1))
        path = tmp_path / "config.json"
        save_config(cfg, path)
        rc = main(["simulate", "--config", str(path), "--out", str(tmp_path / "r.csv")])
        assert rc == EXIT_NUMERICAL


class TestClassify:
    def test_value_to_label(self, capsys, tmp_path):
        out = tmp_path / "cls.txt"
        rc = main(["classify", "2.0", "--format", "csv", "--out", str(out)])
        assert rc == EXIT_OK
        assert "very low" in out.read_text()

    def test_json_memberships(self, tmp_path):
        out = tmp_path / "cls.json"
        rc = main(["classify", "45.0", "--format", "json", "--out", str(out)])
        assert rc == EXIT_OK
        doc = json.loads(out.read_text())
        entry = doc["classifications"][0]
        assert entry["label"] == "very high"
        assert set(entry["memberships"]) == {"very low", "low", "medium", "high", "very high"}

    def test_report_classification(self, tmp_path, tiny_config):
        rec = tmp_path / "rec.csv"
        main(["simulate", "--config", str(tiny_config), "--freq-hz", "0.005", "--out", str(rec)])
        report = tmp_path / "report.json"
        main(["analyze", str(rec), "--f0-hz", "0.005", "--format", "json", "--out", str(report)])
        out = tmp_path / "cls.json"
        rc = main(["classify", "--report", str(report), "--format", "json", "--out", str(out)])
        assert rc == EXIT_OK
        assert len(json.loads(out.read_text())["classifications"]) == 2

    def test_no_input_is_validation_error(self):
        assert main(["classify"]) == EXIT_VALIDATION


class TestSweepMixIngest:
    def test_sweep_csv_and_json(self, tmp_path, tiny_config):
        jout = tmp_path / "sweep.json"
        cout = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", str(tiny_config), "--format", "json",
                     "--out", str(jout)]) == EXIT_OK
        assert main(["sweep", "--config", str(tiny_config), "--format", "csv",
                     "--out", str(cout)]) == EXIT_OK
        doc = json.loads(jout.read_text())
        assert len(doc["entries"]) == 4
        assert "config_hash" in doc["provenance"]
        rows = cout.read_text().strip().splitlines()
        assert len(rows) == 5  # header + 4 entries

    def test_mix_subcommand(self, tmp_path, tiny_config):
        out = tmp_path / "mix.json"
        rc = main(["mix", "--config", str(tiny_config), "--f2-hz", "0.005",
                   "--format", "json", "--out", str(out)])
        assert rc == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["reports"][0]["f2_hz"] == 0.005
        assert len(doc["reports"][0]["matched"]) > 0

    def test_ingest_summary_and_rewrite(self, tmp_path, capsys):
        src = tmp_path / "rec.csv"
        src.write_text("t_s,ch1\n0,1.0\n1,2.0\n2,3.0\n")
        out = tmp_path / "norm.csv"
        rc = main(["ingest", str(src), "--out", str(out)])
        assert rc == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["channels"] == ["ch1"]
        assert summary["dt_s"] == 1.0
        assert out.exists()

    def test_ingest_jitter_needs_flag(self, tmp_path):
        src = tmp_path / "rec.csv"
        src.write_text("t_s,ch1\n0,1.0\n1.5,2.0\n2,3.0\n3,1.0\n")
        assert main(["ingest", str(src)]) == EXIT_VALIDATION
        assert main(["ingest", str(src), "--resample"]) == EXIT_OK


class TestParser:
    def test_usage_error_exits_validation(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--freq-hz", "notafloat", "--duration-s", "10"])
        assert exc.value.code == EXIT_VALIDATION

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["warp"])
        assert exc.value.code == EXIT_VALIDATION
