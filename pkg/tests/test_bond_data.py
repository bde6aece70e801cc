"""Bond ingestion, cleaning, descriptives, region split, and series join."""

from __future__ import annotations

import numpy as np
import pytest

from pmclogit import bond_data as bd
from pmclogit import pmc_index as pmc
from pmclogit.errors import DataError

HEADER = "bond_id,issue_year,rating_label,amount,term,option,ROA,DTA,AT,GDP_growth,province,issuer_id"


def _row(i, year=2018, rating="AA+", amount=8.0, term=5.0, option=1, roa=1.5,
         dta=50.0, at=0.07, gdp=0.08, province="Guangdong", issuer="I1"):
    return f"B{i},{year},{rating},{amount},{term},{option},{roa},{dta},{at},{gdp},{province},{issuer}"


def write_csv(tmp_path, rows, header=HEADER, name="bonds.csv"):
    path = tmp_path / name
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


def record(i=0, year=2018, rating="AA+", province="Guangdong", im=None, **kw):
    fields = dict(amount=8.0, term=5.0, option=1, ROA=1.5, DTA=50.0, AT=0.07, GDP_growth=0.08)
    fields.update(kw)
    return bd.BondRecord(bond_id=f"B{i}", issue_year=year, rating_label=rating,
                         province=province, issuer_id="I1", im_guarantee=im, **fields)


class TestEncodeRating:
    def test_bijection(self):
        assert bd.encode_rating("AAA") == 1
        assert bd.encode_rating("AA+") == 2
        assert bd.encode_rating("AA") == 3
        for label in ("AAA", "AA+", "AA"):
            assert bd.decode_rating(bd.encode_rating(label)) == label

    def test_below_floor_rejected_citing_floor(self):
        with pytest.raises(DataError, match="at least an AA rating"):
            bd.encode_rating("BBB")
        with pytest.raises(DataError, match="at least an AA rating"):
            bd.encode_rating("AA-")


class TestLoadBonds:
    def test_clean_file_loads_fully(self, tmp_path):
        path = write_csv(tmp_path, [_row(i) for i in range(10)])
        ds = bd.load_bonds(path)
        assert len(ds) == 10
        assert ds.load_report.n_read == 10
        assert ds.load_report.missing_drops == {}
        assert ds.load_report.outlier_drops == {}

    def test_missing_value_dropped_and_counted(self, tmp_path):
        rows = [_row(i) for i in range(5)]
        rows[2] = rows[2].replace(",1.5,", ",,")  # blank out ROA
        path = write_csv(tmp_path, rows)
        ds = bd.load_bonds(path)
        assert len(ds) == 4
        assert ds.load_report.missing_drops == {"ROA": 1}

    def test_outlier_dropped_by_iqr_fence(self, tmp_path):
        # hand check: terms 4..7 plus 10^6; Q1=4.75, Q3=6.5 (linear interpolation),
        # IQR=1.75 -> fence [-0.5, 11.75]; 10^6 falls outside
        terms = [4.0, 5.0, 6.0, 7.0, 1e6]
        rows = [_row(i, term=t) for i, t in enumerate(terms)]
        path = write_csv(tmp_path, rows)
        ds = bd.load_bonds(path)
        assert len(ds) == 4
        assert ds.load_report.outlier_drops == {"term": 1}
        assert ds.column("term").max() == 7.0

    def test_missing_required_column_rejected(self, tmp_path):
        header = HEADER.replace(",province", "")
        rows = [_row(i).rsplit(",", 2)[0] + ",I1" for i in range(3)]
        path = write_csv(tmp_path, rows, header=header)
        with pytest.raises(DataError, match="province"):
            bd.load_bonds(path)

    def test_unparseable_cell_rejects_row_with_line_number(self, tmp_path):
        rows = [_row(0), _row(1, amount="not-a-number"), _row(2)]
        path = write_csv(tmp_path, rows)
        ds = bd.load_bonds(path)
        assert len(ds) == 2
        (line_no, reason), = ds.load_report.rejected_lines
        assert line_no == 3
        assert "amount" in reason

    def test_inadmissible_rating_rejects_row(self, tmp_path):
        rows = [_row(0), _row(1, rating="A+")]
        ds = bd.load_bonds(write_csv(tmp_path, rows))
        assert len(ds) == 1
        assert "at least AA" in ds.load_report.rejected_lines[0][1]

    def test_schema_renames_and_delimiter(self, tmp_path):
        header = HEADER.replace("rating_label", "rate").replace(",", ";")
        rows = [_row(i).replace(",", ";") for i in range(3)]
        path = write_csv(tmp_path, rows, header=header)
        ds = bd.load_bonds(path, {"delimiter": ";", "columns": {"rating_label": "rate"}})
        assert len(ds) == 3

    def test_im_guarantee_column_ingested_when_present(self, tmp_path):
        header = HEADER + ",im_guarantee"
        rows = [_row(i) + ",0.3" for i in range(3)]
        ds = bd.load_bonds(write_csv(tmp_path, rows, header=header))
        assert ds.has_im_guarantee()
        np.testing.assert_allclose(ds.column("im_guarantee"), 0.3)


class TestDescriptiveStats:
    def test_simple_column(self):
        ds = bd.BondDataset.from_records([record(i, ROA=v) for i, v in enumerate([1.0, 2.0, 3.0])])
        row = next(s for s in bd.descriptive_stats(ds) if s.name == "ROA")
        assert (row.mean, row.std, row.min, row.max) == (2.0, 1.0, 1.0, 3.0)
        assert row.n == 3

    def test_constant_column_zero_std(self):
        ds = bd.BondDataset.from_records([record(i) for i in range(4)])
        row = next(s for s in bd.descriptive_stats(ds) if s.name == "DTA")
        assert row.std == 0.0

    def test_table_order_matches_report_convention(self):
        ds = bd.BondDataset.from_records([record(i, im=0.3) for i in range(3)])
        names = [s.name for s in bd.descriptive_stats(ds)]
        assert names == list(bd.DESCRIPTIVE_ORDER)

    def test_self_concatenation_changes_only_n(self):
        recs = [record(i, ROA=v) for i, v in enumerate([1.0, 5.0, 2.5, -0.5])]
        ds = bd.BondDataset.from_records(recs)
        ds2 = bd.BondDataset.from_records(recs + recs)
        for a, b in zip(bd.descriptive_stats(ds), bd.descriptive_stats(ds2)):
            assert b.n == 2 * a.n
            assert b.mean == pytest.approx(a.mean, rel=1e-12)
            assert (b.min, b.max) == (a.min, a.max)
            col = np.asarray(ds2.column(a.name), dtype=float)
            assert b.std == pytest.approx(float(col.std(ddof=1)), rel=1e-12)

    def test_empty_dataset_rejected(self):
        with pytest.raises(DataError, match="empty"):
            bd.descriptive_stats(bd.BondDataset.from_records([]))


class TestCorrelation:
    def _ds(self, rng, n=10000):
        cols = {name: rng.standard_normal(n) for name in ("ROA", "DTA", "AT", "GDP_growth")}
        recs = [
            record(i, im=0.3, amount=float(rng.standard_normal() + 8), term=float(rng.uniform(1, 9)),
                   option=int(rng.integers(0, 2)), ROA=float(cols["ROA"][i]), DTA=float(cols["DTA"][i]),
                   AT=float(cols["AT"][i]), GDP_growth=float(cols["GDP_growth"][i]))
            for i in range(n)
        ]
        return bd.BondDataset.from_records(recs)

    def test_self_correlation_unit(self, rng):
        ds = self._ds(rng, 500)
        names, corr = bd.correlation_matrix(ds, columns=("ROA", "DTA"))
        assert corr[0, 0] == 1.0 and corr[1, 1] == 1.0

    def test_negated_column_perfectly_anticorrelated(self):
        vals = [1.0, 2.0, 5.0, -3.0]
        recs = [record(i, ROA=v, DTA=-v) for i, v in enumerate(vals)]
        _, corr = bd.correlation_matrix(bd.BondDataset.from_records(recs), columns=("ROA", "DTA"))
        assert corr[0, 1] == pytest.approx(-1.0, abs=1e-12)

    def test_independent_columns_near_zero(self, rng):
        ds = self._ds(rng, 10000)
        _, corr = bd.correlation_matrix(ds, columns=("ROA", "DTA", "AT", "GDP_growth"))
        off = corr[~np.eye(4, dtype=bool)]
        assert np.all(np.abs(off) < 0.05)

    def test_positive_semidefinite(self, rng):
        ds = self._ds(rng, 800)
        _, corr = bd.correlation_matrix(ds)
        assert np.linalg.eigvalsh(corr).min() >= -1e-10

    def test_constant_column_named_in_error(self):
        recs = [record(i, im=0.1 * i, ROA=float(i)) for i in range(5)]
        with pytest.raises(DataError, match="'amount'"):
            bd.correlation_matrix(bd.BondDataset.from_records(recs))


class TestRatingByYear:
    def test_small_crosstab(self):
        recs = [record(0, 2015, "AAA"), record(1, 2015, "AAA"), record(2, 2016, "AA")]
        ct = bd.rating_by_year(bd.BondDataset.from_records(recs))
        assert ct.cells[0, 0] == 2  # AAA x 2015
        assert ct.total == 3
        assert ct.years == (2015, 2016)

    def test_margins_equal_cell_sums(self, rng):
        recs = [
            record(i, int(rng.integers(2015, 2024)), rng.choice(["AAA", "AA+", "AA"]))
            for i in range(200)
        ]
        ct = bd.rating_by_year(bd.BondDataset.from_records(recs))
        assert ct.row_totals.sum() == ct.total == ct.col_totals.sum()
        np.testing.assert_array_equal(ct.cells.sum(axis=1), ct.row_totals)
        np.testing.assert_array_equal(ct.cells.sum(axis=0), ct.col_totals)

    def test_empty_years_absent_unless_range_given(self):
        recs = [record(0, 2015), record(1, 2018)]
        ds = bd.BondDataset.from_records(recs)
        assert bd.rating_by_year(ds).years == (2015, 2018)
        ranged = bd.rating_by_year(ds, year_range=(2015, 2018))
        assert ranged.years == (2015, 2016, 2017, 2018)
        assert ranged.col_totals[1] == 0

    def test_printed_distribution_fixture(self):
        # the published 2015-2023 rating distribution; margins must reproduce
        # the printed totals and the i_ra mean the printed 1.9376
        printed = {
            "AAA": [50, 165, 216, 290, 357, 513, 690, 645, 512],
            "AA+": [162, 312, 300, 283, 418, 594, 760, 490, 204],
            "AA": [419, 564, 457, 299, 389, 337, 224, 113, 25],
        }
        years = range(2015, 2024)
        recs = []
        i = 0
        for label, counts in printed.items():
            for year, count in zip(years, counts):
                for _ in range(count):
                    recs.append(record(i, year, label))
                    i += 1
        ds = bd.BondDataset.from_records(recs)
        ct = bd.rating_by_year(ds)
        assert ct.total == 9788
        assert list(ct.row_totals) == [3438, 3523, 2827]
        assert list(ct.col_totals) == [631, 1041, 973, 872, 1164, 1444, 1674, 1248, 741]
        i_ra = next(s for s in bd.descriptive_stats(ds) if s.name == "i_ra")
        assert i_ra.mean == pytest.approx(1.9376, abs=5e-5)


class TestSplitRegion:
    def test_sizes(self):
        recs = [record(0, province="Guangdong"), record(1, province="Guangdong"),
                record(2, province="Sichuan")]
        east, west = bd.split_region(bd.BondDataset.from_records(recs), bd.default_region_map())
        assert (len(east), len(west)) == (2, 1)

    def test_all_east_leaves_empty_west(self):
        recs = [record(i, province="Jiangsu") for i in range(4)]
        east, west = bd.split_region(bd.BondDataset.from_records(recs), bd.default_region_map())
        assert len(east) == 4 and len(west) == 0

    def test_partition_preserves_rows(self, rng):
        provinces = ["Guangdong", "Sichuan", "Beijing", "Gansu", "Zhejiang"]
        recs = [record(i, province=str(rng.choice(provinces))) for i in range(60)]
        ds = bd.BondDataset.from_records(recs)
        east, west = bd.split_region(ds, bd.default_region_map())
        assert len(east) + len(west) == len(ds)
        assert sorted(r.bond_id for r in east.rows + west.rows) == sorted(
            r.bond_id for r in ds.rows
        )

    def test_unmapped_province_listed(self):
        rm = bd.RegionMap(mapping={"Guangdong": "east"}, default=None)
        recs = [record(0, province="Guangdong"), record(1, province="Atlantis")]
        with pytest.raises(DataError, match="Atlantis"):
            bd.split_region(bd.BondDataset.from_records(recs), rm)

    def test_region_map_file_round_trip(self, tmp_path):
        path = tmp_path / "regions.json"
        path.write_text(
            '{"regions": {"east": ["Guangdong"], "central_west": ["Sichuan"]}}',
            encoding="utf-8",
        )
        rm = bd.load_region_map(path)
        assert rm.region_of("Guangdong") == "east"
        assert rm.region_of("Sichuan") == "central_west"
        with pytest.raises(DataError):
            rm.region_of("Hunan")


def _series(values, scaling="divide_by_10"):
    years = sorted(values)
    return pmc.GuaranteeSeries(start=years[0], end=years[-1], values=values,
                               aggregation_mode="issue_year_mean", scaling=scaling)


class TestJoinGuarantee:
    def test_scaled_join(self):
        ds = bd.BondDataset.from_records([record(0, year=2020)])
        joined = bd.join_guarantee(ds, _series({2020: 3.0}))
        assert joined.column("im_guarantee")[0] == pytest.approx(0.30)

    def test_identity_scaling(self):
        ds = bd.BondDataset.from_records([record(0, year=2020)])
        joined = bd.join_guarantee(ds, _series({2020: 3.0}, scaling="identity"))
        assert joined.column("im_guarantee")[0] == 3.0

    def test_uncovered_year_rejected(self):
        ds = bd.BondDataset.from_records([record(0, year=2007)])
        with pytest.raises(DataError, match="2007"):
            bd.join_guarantee(ds, _series({2008: 4.0}))

    def test_original_dataset_untouched(self):
        ds = bd.BondDataset.from_records([record(0, year=2020)])
        bd.join_guarantee(ds, _series({2020: 3.0}))
        assert not ds.has_im_guarantee()
