"""Table rendering, delimited round trips, and the series chart."""

from __future__ import annotations

import re

import pytest

from pmclogit import report
from pmclogit.ordered_logit import inference_row
from pmclogit.pmc_index import GuaranteeSeries


def _series(values):
    years = sorted(values)
    return GuaranteeSeries(start=years[0], end=years[-1], values=values,
                           aggregation_mode="issue_year_mean", scaling="identity")


class TestFormatting:
    def test_paper_fixture_coefficient_cell(self):
        row = inference_row("im_guarantee", -3.781, 0.439)
        table = report.Table(
            title="t", columns=report._INFER_COLUMNS, formats=report._INFER_FORMATS,
            rows=[[row.name, report.Starred(row.coefficient, row.stars), row.std_error,
                   row.t_value, row.p_value, row.ci_low, row.ci_high]],
        )
        text = report.render_plain(table)
        assert "-3.781***" in text

    def test_four_decimal_trimming(self):
        assert report._fmt_trim(-3.7810, 4) == "-3.781"
        assert report._fmt_trim(-2.9386, 4) == "-2.9386"
        assert report._fmt_trim(5.0, 4) == "5"
        assert report._fmt_trim(-0.00001, 4) == "0"

    def test_p_values_three_decimals(self):
        assert report._fmt_cell_plain(0.0264, "p") == "0.026"
        assert report._fmt_cell_plain(0.0, "p") == "0.000"

    def test_delimited_round_trip(self):
        table = report.Table(
            title="t", columns=["variable", "coefficient", "std_err"],
            formats=["str", "coef", "coef"],
            rows=[["im_guarantee", report.Starred(-3.781234567890123, "***"), 0.439],
                  ["cut1", -4.007, None]],
        )
        text = report.render_delimited(table)
        header, rows = report.parse_delimited(text)
        assert header == table.columns
        assert rows[0][1] == report.Starred(-3.781234567890123, "***")
        assert rows[0][2] == 0.439
        assert rows[1][2] is None

    def test_empty_table_renders_header_only(self, tmp_path):
        table = report.Table(title="empty", columns=["a", "b"], formats=["str", "coef"])
        path = tmp_path / "empty.csv"
        report.emit_table(table, "delimited", path)
        assert path.read_text(encoding="utf-8") == "a,b\n"

    def test_unknown_format_rejected(self, tmp_path):
        table = report.Table(title="t", columns=["a"], formats=["str"])
        from pmclogit.errors import ConfigError

        with pytest.raises(ConfigError):
            report.emit_table(table, "parquet", tmp_path / "x")


class TestSeriesChart:
    def test_vertex_count_matches_series(self, tmp_path):
        svg = report.render_series_svg(_series({2008: 4.0, 2009: 3.5, 2010: 3.0}))
        points = re.search(r'points="([^"]+)"', svg).group(1)
        assert len(points.split()) == 3

    def test_constant_series_horizontal(self):
        svg = report.render_series_svg(_series({2008: 4.0, 2009: 4.0, 2010: 4.0}))
        points = re.search(r'points="([^"]+)"', svg).group(1)
        ys = {p.split(",")[1] for p in points.split()}
        assert len(ys) == 1

    def test_declining_paper_shape(self):
        # published trend: 4.67 in 2008 down to 2.77 in 2024 (SVG y grows downward)
        values = {y: 4.67 - (4.67 - 2.77) * (y - 2008) / 16 for y in range(2008, 2025)}
        svg = report.render_series_svg(_series(values))
        points = re.search(r'points="([^"]+)"', svg).group(1).split()
        first_y = float(points[0].split(",")[1])
        last_y = float(points[-1].split(",")[1])
        assert last_y > first_y

    def test_byte_deterministic(self, tmp_path):
        series = _series({2008: 4.67, 2009: 3.1, 2010: 2.77})
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        report.emit_series_chart(series, a)
        report.emit_series_chart(series, b)
        assert a.read_bytes() == b.read_bytes()
