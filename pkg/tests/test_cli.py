import json

import numpy as np
import pytest

from thinlpp.cli import main
from thinlpp.coupling import read_trajectory_export

TWO_POINT = '{"atoms": [[0, 0.5], [1, 0.5]], "m": 0}'


def write_config(tmp_path, **overrides):
    cfg = {
        "kind": "moment_scaling",
        "model": {"atoms": [[0, 0.5], [1, 0.5]], "m": 0},
        "alpha": 0.25,
        "r": [2],
        "n": [16, 32, 64],
        "replicates": 30,
        "seed": 12,
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


class TestSimulate:
    def test_single_site_prints_the_weight(self, capsys):
        assert main(["simulate", "--n", "1", "--alpha", "1.0", "--seed", "3"]) == 0
        out = capsys.readouterr().out
        assert "L = " in out
        L = float(out.split("L = ")[1].split()[0])
        assert L in (0.0, 1.0)

    def test_deterministic_output(self, capsys):
        args = ["simulate", "--n", "4", "--alpha", "0.5", "--seed", "9"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first
        assert "rows=2" in first
        assert "Card(G)" in first

    def test_hi_fraction_reported_below_one(self, capsys):
        assert main(["simulate", "--n", "64", "--alpha", "0.25", "--seed", "12"]) == 0
        out = capsys.readouterr().out
        ratio = float(out.split("M/n = ")[1].split(")")[0])
        assert 0.0 <= ratio < 1.0

    def test_dump_grid(self, tmp_path, capsys):
        dump = tmp_path / "grid.txt"
        assert main(["simulate", "--n", "6", "--alpha", "0.5", "--seed", "4",
                     "--dump-grid", str(dump)]) == 0
        lines = dump.read_text().strip().splitlines()
        assert len(lines) == 2  # rows, row 1 first
        assert all(tok in ("0", "1") for tok in lines[0].split())

    def test_invalid_model_literal(self, capsys):
        assert main(["simulate", "--n", "2", "--model", "{not json"]) == 1
        assert "error" in capsys.readouterr().err


class TestRun:
    def test_run_writes_record_and_echoes_table(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "rec"
        assert main(["run", str(cfg), "--out", str(out_dir)]) == 0
        stdout = capsys.readouterr().out
        csv_text = (out_dir / "summary.csv").read_text()
        # the printed table is the persisted table, byte for byte
        assert csv_text in stdout.replace("\r\n", "\n")
        assert (out_dir / "summary.json").exists()
        assert (out_dir / "loglog_moments.pdf").exists()
        summary = json.loads((out_dir / "summary.json").read_text())
        for est in summary["estimates"]:
            token = str(est["moment"])
            assert token in csv_text

    def test_check_passing_run_exits_zero(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["run", str(cfg), "--out", str(tmp_path / "rec"), "--check",
                     "--no-figures"]) == 0

    def test_check_failure_exits_two(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            kind="mn_growth",
            n=[8, 16],
            replicates=40,
            constants={"final_freq_max": 0.0},
        )
        code = main(["run", str(cfg), "--out", str(tmp_path / "rec"), "--check",
                     "--no-figures"])
        assert code == 2
        assert "GATE FAIL" in capsys.readouterr().err

    def test_missing_field_names_it(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({
            "kind": "moment_scaling",
            "model": {"atoms": [[0, 0.5], [1, 0.5]], "m": 0},
            "alpha": 0.25, "n": [8, 16], "seed": 1,
        }), encoding="utf-8")
        assert main(["run", str(cfg)]) == 1
        assert "replicates" in capsys.readouterr().err

    def test_parallel_flag_matches_serial(self, tmp_path):
        cfg = write_config(tmp_path, n=[8, 16, 32], replicates=10)
        assert main(["run", str(cfg), "--out", str(tmp_path / "a"), "--no-figures"]) == 0
        assert main(["run", str(cfg), "--out", str(tmp_path / "b"), "--parallel", "4",
                     "--no-figures"]) == 0
        assert (tmp_path / "a" / "summary.json").read_bytes() == \
            (tmp_path / "b" / "summary.json").read_bytes()


class TestCoupleAndLipschitz:
    def test_couple_export(self, tmp_path, capsys):
        out = tmp_path / "traj.txt"
        assert main(["couple", "--n", "16", "--alpha", "0.5", "--seed", "2",
                     "--out", str(out)]) == 0
        export = read_trajectory_export(out)
        assert export["k"].size == 16 * 4 + 1
        assert "c5" in export["meta"]
        assert np.all(np.diff(export["L"]) >= 0)

    def test_lipschitz_report(self, tmp_path, capsys):
        report = tmp_path / "lip.json"
        assert main(["lipschitz", "--n", "32", "--alpha", "0.25", "--seed", "5",
                     "--trajectories", "20", "--out", str(report)]) == 0
        out = capsys.readouterr().out
        assert "O_n frequency" in out
        data = json.loads(report.read_text())
        assert 0.0 <= data["o_n_freq"] <= 1.0
        assert data["constants"]["c1"] == pytest.approx(0.875)


class TestPlots:
    def _moment_record(self, tmp_path):
        cfg = write_config(tmp_path, n=[8, 16, 32, 64, 128], replicates=25)
        out_dir = tmp_path / "rec"
        assert main(["run", str(cfg), "--out", str(out_dir), "--no-figures"]) == 0
        return out_dir

    def test_loglog_structure(self, tmp_path):
        from thinlpp.plots import plot_loglog_moments

        record = self._moment_record(tmp_path)
        summary = json.loads((record / "summary.json").read_text())
        fig = plot_loglog_moments(summary)
        ax = fig.axes[0]
        marker_lines = [ln for ln in ax.lines if ln.get_linestyle() == "None"]
        ref_lines = [ln for ln in ax.lines if ln.get_linestyle() != "None"]
        assert len(marker_lines) == 1
        assert len(marker_lines[0].get_xdata()) == 5
        assert len(ref_lines) == 2  # fit + target guide

    def test_plot_cli_writes_file(self, tmp_path):
        record = self._moment_record(tmp_path)
        out = tmp_path / "fig.pdf"
        assert main(["plot", str(record), "--kind", "loglog_moments", "--out", str(out)]) == 0
        assert out.exists() and out.stat().st_size > 0

    def test_kind_mismatch_rejected(self, tmp_path, capsys):
        record = self._moment_record(tmp_path)
        code = main(["plot", str(record), "--kind", "decay_curve",
                     "--out", str(tmp_path / "x.pdf")])
        assert code == 1
        assert "cannot draw" in capsys.readouterr().err

    def test_trajectory_band_spans_window(self, tmp_path):
        from thinlpp.plots import plot_trajectory

        out = tmp_path / "traj.txt"
        assert main(["couple", "--n", "64", "--alpha", "0.25", "--seed", "3",
                     "--out", str(out)]) == 0
        export = read_trajectory_export(out)
        fig = plot_trajectory(export)
        ax = fig.axes[0]
        band = ax.patches[0]  # axvspan rectangle
        sites, p = 128, 0.5
        hw = np.sqrt(p * (1 - p) * sites)
        assert band.get_x() == pytest.approx(sites * p - hw)
        assert band.get_x() + band.get_width() == pytest.approx(sites * p + hw)

    def test_decay_plot_marks_zero_frequencies(self, tmp_path):
        from thinlpp.plots import plot_decay_curve

        cfg = write_config(tmp_path, kind="mn_growth", n=[16, 32, 64], replicates=60, seed=3)
        out_dir = tmp_path / "rec"
        assert main(["run", str(cfg), "--out", str(out_dir), "--no-figures"]) == 0
        summary = json.loads((out_dir / "summary.json").read_text())
        assert any(row["below_resolution"] for row in summary["per_n"])
        fig = plot_decay_curve(summary)
        ax = fig.axes[0]
        assert any(ln.get_marker() == "v" for ln in ax.lines)
