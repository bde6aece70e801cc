"""PMC index algebra, guarantee strength, and yearly aggregation."""

from __future__ import annotations

from fractions import Fraction

import pytest

from conftest import make_scheme, random_secondary_counts
from pmclogit import pmc_index as pmc
from pmclogit import policy_text as pt
from pmclogit.errors import DataError


def full_card(scheme, value=1, doc_id="d"):
    return pt.Scorecard(doc_id, {s.code: value for s in scheme.secondaries()})


def doc(year, doc_id="d"):
    return pt.PolicyDocument(doc_id, "t", "b", year, "body")


class TestPmcScore:
    def test_all_ones_gives_ten(self):
        scheme = pt.default_scheme()
        score = pmc.pmc_score(full_card(scheme, 1), scheme)
        assert score.pmc == 10.0
        assert score.pmc_exact == Fraction(10)

    def test_all_zeros_gives_zero(self):
        scheme = pt.default_scheme()
        score = pmc.pmc_score(full_card(scheme, 0), scheme)
        assert score.pmc == 0.0

    def test_hand_summed_half_assignment(self):
        # default scheme has seven primaries with 5 secondaries and three with 4;
        # ceil-half of 5 is 3 (0.6 each), half of 4 is 2 (0.5 each):
        # PMC = 7 * 0.6 + 3 * 0.5 = 5.7 by hand.
        scheme = pt.default_scheme()
        values = {}
        for primary in scheme.primaries:
            n_i = len(primary.secondaries)
            k = (n_i + 1) // 2
            for j, sec in enumerate(primary.secondaries):
                values[sec.code] = 1 if j < k else 0
        score = pmc.pmc_score(pt.Scorecard("d", values), scheme)
        assert score.pmc_exact == Fraction(57, 10)
        assert score.pmc == pytest.approx(5.7, abs=1e-15)
        assert score.pmc_exact == sum(score.per_primary, Fraction(0))

    def test_incomplete_scorecard_names_missing(self):
        scheme = pt.default_scheme()
        card = full_card(scheme)
        del card.values["P3:2"]
        with pytest.raises(DataError, match="P3:2"):
            pmc.pmc_score(card, scheme)

    def test_bounds_for_random_schemes(self, rng):
        for _ in range(50):
            scheme = make_scheme(random_secondary_counts(rng))
            values = {s.code: int(rng.integers(0, 2)) for s in scheme.secondaries()}
            score = pmc.pmc_score(pt.Scorecard("d", values), scheme)
            assert Fraction(0) <= score.pmc_exact <= Fraction(10)
            assert 0.0 <= score.pmc <= 10.0

    def test_single_bit_flip_moves_exactly_one_over_n(self, rng):
        for _ in range(30):
            counts = random_secondary_counts(rng)
            scheme = make_scheme(counts)
            values = {s.code: int(rng.integers(0, 2)) for s in scheme.secondaries()}
            base = pmc.pmc_score(pt.Scorecard("d", values), scheme)
            i = int(rng.integers(0, 10))
            primary = scheme.primaries[i]
            target = primary.secondaries[int(rng.integers(0, len(primary.secondaries)))]
            if values[target.code] == 1:
                continue
            flipped = dict(values)
            flipped[target.code] = 1
            after = pmc.pmc_score(pt.Scorecard("d", flipped), scheme)
            assert after.pmc_exact - base.pmc_exact == Fraction(1, len(primary.secondaries))
            assert after.pmc > base.pmc


class TestGuaranteeStrength:
    def test_complement_endpoints(self):
        assert pmc.guarantee_strength(10.0) == 0.0
        assert pmc.guarantee_strength(0.0) == 10.0

    def test_published_anchor_values(self):
        # the index ran from 4.67 (2008) down to 2.77 (2024)
        assert pmc.guarantee_strength(5.33) == pytest.approx(4.67, abs=1e-12)
        assert pmc.guarantee_strength(7.23) == pytest.approx(2.77, abs=1e-12)

    def test_domain_enforced(self):
        with pytest.raises(ValueError):
            pmc.guarantee_strength(-0.1)
        with pytest.raises(ValueError):
            pmc.guarantee_strength(10.4)

    def test_complement_identity_exact(self, rng):
        for _ in range(100):
            scheme = make_scheme(random_secondary_counts(rng))
            values = {s.code: int(rng.integers(0, 2)) for s in scheme.secondaries()}
            score = pmc.pmc_score(pt.Scorecard("d", values), scheme)
            assert score.guarantee_exact + score.pmc_exact == Fraction(10)
            assert pmc.guarantee_strength(score.pmc) == 10.0 - score.pmc


def _scored(year, g, doc_id):
    # a PmcScore whose float G equals g exactly (g in tenths keeps it exact)
    exact = Fraction(10) - Fraction(g).limit_denominator(10**6)
    return (
        doc(year, doc_id),
        pmc.PmcScore(doc_id, (exact,), exact),
    )


class TestYearlySeries:
    def test_carry_forward(self):
        series = pmc.yearly_series([_scored(2008, 4.0, "a")], "issue_year_mean",
                                   "identity", (2008, 2010))
        assert series.values == {2008: 4.0, 2009: 4.0, 2010: 4.0}

    def test_cumulative_running_mean(self):
        scored = [_scored(2008, 4.0, "a"), _scored(2010, 2.0, "b")]
        series = pmc.yearly_series(scored, "cumulative_in_force_mean", "identity", (2008, 2010))
        assert series.values == {2008: 4.0, 2009: 4.0, 2010: 3.0}

    def test_same_year_mean(self):
        scored = [_scored(2008, 4.0, "a"), _scored(2008, 6.0, "b")]
        series = pmc.yearly_series(scored, "issue_year_mean", "identity", (2008, 2008))
        assert series.values == {2008: 5.0}

    def test_document_before_range_carries_in(self):
        scored = [_scored(2006, 3.0, "a"), _scored(2009, 5.0, "b")]
        series = pmc.yearly_series(scored, "issue_year_mean", "identity", (2008, 2009))
        assert series.values == {2008: 3.0, 2009: 5.0}

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError, match="empty"):
            pmc.yearly_series([], "issue_year_mean", "identity", (2008, 2010))

    def test_no_document_at_or_before_start(self):
        with pytest.raises(DataError, match="at or before"):
            pmc.yearly_series([_scored(2012, 4.0, "a")], "issue_year_mean",
                              "identity", (2008, 2015))

    def test_cumulative_invariant_to_within_year_order(self):
        a = [_scored(2008, 4.1, "a"), _scored(2008, 2.3, "b"), _scored(2009, 3.7, "c")]
        b = [a[1], a[0], a[2]]
        sa = pmc.yearly_series(a, "cumulative_in_force_mean", "identity", (2008, 2009))
        sb = pmc.yearly_series(b, "cumulative_in_force_mean", "identity", (2008, 2009))
        assert sa.values == sb.values  # bit-exact

    def test_scaling_applies_at_join_time_only(self):
        series = pmc.yearly_series([_scored(2008, 4.0, "a")], "issue_year_mean",
                                   "divide_by_10", (2008, 2008))
        assert series.value(2008) == 4.0
        assert series.scaled_value(2008) == 0.4

    def test_uncovered_year_rejected(self):
        series = pmc.yearly_series([_scored(2008, 4.0, "a")], "issue_year_mean",
                                   "identity", (2008, 2010))
        with pytest.raises(DataError, match="not covered"):
            series.value(2007)


class TestExport:
    def test_two_column_export_round_trips(self, tmp_path):
        series = pmc.yearly_series(
            [_scored(2008, 4.67, "a"), _scored(2010, 2.77, "b")],
            "issue_year_mean", "identity", (2008, 2010),
        )
        path = tmp_path / "g.csv"
        pmc.export_series(series, path)
        lines = path.read_text(encoding="utf-8").strip().splitlines()
        assert lines[0] == "year,G"
        parsed = {int(l.split(",")[0]): float(l.split(",")[1]) for l in lines[1:]}
        assert parsed == series.values
