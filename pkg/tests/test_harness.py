import dataclasses
import math

import numpy as np
import pytest

from csmud.harness import (CSV_HEADER, SimConfig, config_lines, format_csv,
                           load_config, measurement_sufficiency, paper_scale,
                           run_sweep, run_trial)


def small_config(**kw):
    base = dict(K=48, N=16, M=4, p_a=0.06, L=30, snr_grid_db=(6.0, 12.0),
                n_frames=12, taps=3, out="unused")
    base.update(kw)
    return SimConfig(**base)


class TestSimConfig:
    def test_overload_factor(self):
        cfg = SimConfig(K=320, N=32)
        assert cfg.overload == 10.0
        assert paper_scale(cfg).overload == 10.0

    def test_framing_properties(self):
        cfg = SimConfig(K=320, N=32, M=8, L=100)
        assert cfg.L_c == 212
        assert cfg.L_d == 71

    def test_paper_scale_values(self):
        cfg = paper_scale(SimConfig())
        assert (cfg.K, cfg.N, cfg.taps, cfg.block_len, cfg.L) == (1390, 139, 14, 10, 100)
        assert cfg.p_a == 0.01

    def test_validation(self):
        with pytest.raises(ValueError):
            SimConfig(scheme="nope")
        with pytest.raises(ValueError):
            SimConfig(stop_mode="sometimes")
        with pytest.raises(ValueError):
            SimConfig(M=64, N=32)
        with pytest.raises(ValueError):
            SimConfig(p_a=1.5)
        with pytest.raises(ValueError):
            SimConfig(snr_grid_db=())


class TestConfigFile:
    def test_round_trip_through_lines(self, tmp_path):
        cfg = small_config(scheme="direct", workers=2)
        path = tmp_path / "cfg.txt"
        path.write_text("\n".join(config_lines(cfg)) + "\n")
        assert load_config(path) == cfg

    def test_parses_types_and_comments(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text(
            "# comment line\n"
            "K = 64\n"
            "N = 16  # trailing comment\n"
            "p_a = 0.02\n"
            "snr_grid_db = 0, 2.5, 5\n"
            "scheme = conventional\n")
        cfg = load_config(path)
        assert cfg.K == 64 and cfg.N == 16
        assert cfg.p_a == 0.02
        assert cfg.snr_grid_db == (0.0, 2.5, 5.0)
        assert cfg.scheme == "conventional"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("K = 64\nbogus_key = 3\n")
        with pytest.raises(ValueError, match="unknown config key"):
            load_config(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("K = 64\nK = 32\n")
        with pytest.raises(ValueError, match="duplicate"):
            load_config(path)


class TestMeasurementSufficiency:
    def test_paper_parameters_pass(self):
        v = measurement_sufficiency(N=139, K_a=14, K=1390, M=8, c=1.0)
        assert v.passed
        assert v.bound == pytest.approx(14 * math.log(8 * 1390), rel=1e-12)
        assert 130.0 < v.bound < 131.0

    def test_zero_sparsity_passes(self):
        v = measurement_sufficiency(N=16, K_a=0, K=100, M=4)
        assert v.passed and v.bound == 0.0

    def test_large_constant_fails(self):
        assert not measurement_sufficiency(N=139, K_a=14, K=1390, M=8, c=10.0).passed


class TestRunTrial:
    def test_deterministic(self):
        cfg = small_config()
        a = run_trial(cfg, 5)
        b = run_trial(cfg, 5)
        assert a.per_scheme == b.per_scheme
        assert a.K_a == b.K_a

    def test_zero_activity_counts_no_bits(self):
        cfg = small_config(p_a=0.0, scheme="direct")
        rec = run_trial(cfg, 0)
        st = rec.per_scheme["direct"]
        assert rec.K_a == 0
        assert st.bits == 0 and st.bit_errors == 0
        assert st.frames_with_traffic == 0
        assert st.false_alarms == 0  # oracle stop with K_a = 0 detects nobody

    def test_noiseless_single_pipeline_zero_errors(self):
        cfg = small_config(p_a=0.02, snr_grid_db=(math.inf,), n_frames=40)
        errors = 0
        bits = 0
        for t in range(40):
            rec = run_trial(cfg, t)
            for scheme in ("direct", "conventional"):
                errors += rec.per_scheme[scheme].bit_errors
                bits += rec.per_scheme[scheme].bits
        assert bits > 0
        assert errors == 0

    def test_snr_index_mapping(self):
        cfg = small_config()
        assert run_trial(cfg, 0).snr_db == 6.0
        assert run_trial(cfg, 12).snr_db == 12.0
        with pytest.raises(ValueError):
            run_trial(cfg, 24)

    def test_accounting_closure(self):
        cfg = small_config()
        for t in range(8):
            rec = run_trial(cfg, t)
            for st in rec.per_scheme.values():
                assert st.bits == rec.K_a * cfg.L
                assert st.bit_errors <= st.bits
                assert st.active + st.inactive == cfg.K


class TestRunSweep:
    def test_rows_and_csv_schema(self, tmp_path):
        cfg = small_config(scheme="both")
        rows = run_sweep(cfg, out_dir=tmp_path)
        assert len(rows) == 4  # 2 schemes x 2 snr points
        csv = (tmp_path / "results.csv").read_text()
        lines = csv.strip().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 5
        first = lines[1].split(",")
        assert first[0] == "direct"
        # ber column equals bit_errors / bits exactly
        for r, line in zip(rows, lines[1:]):
            cols = line.split(",")
            assert int(cols[4]) == r.bits
            assert int(cols[5]) == r.bit_errors
            if r.bits:
                assert float(cols[6]) == r.bit_errors / r.bits

    def test_lambda_recorded(self, tmp_path):
        cfg = small_config()
        rows = run_sweep(cfg, out_dir=tmp_path, render_figure=False)
        for r in rows:
            assert r.overload == cfg.K / cfg.N

    def test_byte_identical_rerun(self, tmp_path):
        cfg = small_config()
        run_sweep(cfg, out_dir=tmp_path / "a", render_figure=False)
        run_sweep(cfg, out_dir=tmp_path / "b", render_figure=False)
        assert (tmp_path / "a/results.csv").read_bytes() == \
            (tmp_path / "b/results.csv").read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        cfg = small_config()
        rows_s = run_sweep(cfg, out_dir=tmp_path / "s", render_figure=False)
        cfg2 = dataclasses.replace(cfg, workers=2)
        rows_p = run_sweep(cfg2, out_dir=tmp_path / "p", render_figure=False)
        assert (tmp_path / "s/results.csv").read_bytes() == \
            (tmp_path / "p/results.csv").read_bytes()
        assert [r.ber for r in rows_s] == [r.ber for r in rows_p]

    def test_output_files_present(self, tmp_path):
        cfg = small_config(scheme="both")
        run_sweep(cfg, out_dir=tmp_path)
        for name in ("results.csv", "plot_direct.dat", "plot_conventional.dat",
                     "manifest.txt", "ber_vs_snr.png"):
            assert (tmp_path / name).exists(), name
        manifest = (tmp_path / "manifest.txt").read_text()
        assert "K = 48" in manifest
        assert "overload_lambda = 3.0" in manifest

    def test_plot_data_is_log10(self, tmp_path):
        cfg = small_config()
        rows = run_sweep(cfg, out_dir=tmp_path, render_figure=False)
        for line in (tmp_path / "plot_direct.dat").read_text().splitlines()[1:]:
            snr, logber = line.split()
            row = next(r for r in rows
                       if r.scheme == "direct" and r.snr_db == float(snr))
            assert float(logber) == pytest.approx(math.log10(row.ber), abs=1e-6)

    def test_single_point_single_frame(self, tmp_path):
        cfg = small_config(snr_grid_db=(8.0,), n_frames=1, scheme="direct")
        rows = run_sweep(cfg, out_dir=tmp_path, render_figure=False)
        assert len(rows) == 1
        lines = (tmp_path / "results.csv").read_text().strip().splitlines()
        assert len(lines) == 2
