"""Renderer unit tests against hand-built schema-conformant CSVs."""

import numpy as np
import pytest

from conftest import timeseries_header, write_sweep_csv, write_timeseries_csv
from mmcfigures import PlotSpec, SchemaError, SweepTable, TimeSeries, render
from mmcfigures.cli import main


class TestSchema:
    def test_timeseries_blocks(self, ts_csv):
        ts = TimeSeries.load(ts_csv)
        assert ts.n_modules == 4
        assert ts.vc_true["u"].shape == (60, 4)
        assert set(ts.vc_est) == {"conv", "comp"}
        assert set(ts.maxerr) == {"conv", "comp"}
        assert ts.scalars["i_out"].shape == (60,)

    def test_missing_truth_block_named(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t,i_u\n0.0,1.0\n")
        with pytest.raises(SchemaError, match="vc_true_u"):
            TimeSeries.load(p)

    def test_sweep_table(self, sweep_csv):
        table = SweepTable.load(sweep_csv)
        assert table.param_name == "f_sample"
        assert table.param.size == 5
        assert np.all(table.mean_err["comp"] <= table.mean_err["conv"])

    def test_sweep_without_error_columns_rejected(self, tmp_path):
        p = tmp_path / "bad_sweep.csv"
        p.write_text("f_sample,other\n1000,1\n")
        with pytest.raises(SchemaError, match="meanerr"):
            SweepTable.load(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError, match="not found"):
            TimeSeries.load(tmp_path / "absent.csv")


class TestRender:
    @pytest.mark.parametrize("kind", ["waveforms", "estimates_overlay",
                                      "error_profile"])
    def test_timeseries_kinds_produce_images(self, ts_csv, tmp_path, kind):
        out = render(PlotSpec(csv_path=str(ts_csv), kind=kind,
                              out_path=str(tmp_path / f"{kind}.png")))
        assert out.is_file() and out.stat().st_size > 0

    def test_sweep_curve(self, sweep_csv, tmp_path):
        out = render(PlotSpec(csv_path=str(sweep_csv), kind="sweep_curve",
                              out_path=str(tmp_path / "sweep.png")))
        assert out.is_file() and out.stat().st_size > 0

    def test_header_only_csv_renders_empty_axes(self, tmp_path):
        p = tmp_path / "empty_timeseries.csv"
        p.write_text(",".join(timeseries_header(4)) + "\n")
        for kind in ("waveforms", "estimates_overlay", "error_profile"):
            out = render(PlotSpec(csv_path=str(p), kind=kind,
                                  out_path=str(tmp_path / f"empty_{kind}.png")))
            assert out.is_file() and out.stat().st_size > 0

    def test_lower_arm_selection(self, ts_csv, tmp_path):
        out = render(PlotSpec(csv_path=str(ts_csv), kind="estimates_overlay",
                              out_path=str(tmp_path / "lower.png"), arm="l"))
        assert out.is_file()

    def test_schema_mismatch_names_column(self, tmp_path):
        cols = [c for c in timeseries_header(4) if not c.startswith("maxerr")]
        p = tmp_path / "no_err_timeseries.csv"
        p.write_text(",".join(cols) + "\n")
        with pytest.raises(SchemaError, match="maxerr"):
            render(PlotSpec(csv_path=str(p), kind="error_profile",
                            out_path=str(tmp_path / "x.png")))

    def test_unknown_kind_rejected(self, ts_csv, tmp_path):
        with pytest.raises(SchemaError, match="plot kind"):
            PlotSpec(csv_path=str(ts_csv), kind="pie",
                     out_path=str(tmp_path / "x.png"))

    def test_render_does_not_mutate_input(self, ts_csv, tmp_path):
        before = ts_csv.read_bytes()
        render(PlotSpec(csv_path=str(ts_csv), kind="waveforms",
                        out_path=str(tmp_path / "w.png")))
        assert ts_csv.read_bytes() == before


class TestCli:
    def test_success_exit_zero(self, ts_csv, tmp_path, capsys):
        code = main(["error_profile", str(ts_csv),
                     "-o", str(tmp_path / "p.png")])
        assert code == 0
        assert "wrote" in capsys.readouterr().out

    def test_schema_error_exit_two(self, tmp_path, capsys):
        p = tmp_path / "junk.csv"
        p.write_text("a,b\n1,2\n")
        code = main(["error_profile", str(p), "-o", str(tmp_path / "p.png")])
        assert code == 2
        assert "mmcplot" in capsys.readouterr().err

    def test_manifest_annotation_consumed(self, tmp_path, capsys):
        write_timeseries_csv(tmp_path / "run_timeseries.csv")
        (tmp_path / "run_manifest.json").write_text(
            '{"seed": 7, "version": "0.1.0", "config": {}, "metrics": {}, '
            '"files": ["run_timeseries.csv"]}')
        code = main(["waveforms", str(tmp_path / "run_timeseries.csv"),
                     "-o", str(tmp_path / "w.png")])
        assert code == 0
