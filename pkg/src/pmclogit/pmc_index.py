"""Per-document PMC index, guarantee-strength conversion, and yearly series.

The PMC index of a scored document sums, over the 10 primary dimensions, the
fraction of satisfied secondary indicators:

    PMC = sum_i (sum_j P_ij) / n_i,  in [0, 10].

Implicit guarantee strength is its complement, G = 10 - PMC: policies aimed
at curbing guarantee expectations raise PMC and lower G.

Per-primary fractions and the PMC sum are kept as exact ``Fraction`` values
so that the algebraic identities (bounds, G + PMC = 10, a single indicator
bit moving PMC by exactly 1/n_i) hold without floating-point caveats; the
float ``pmc`` is the correctly rounded value of the exact sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DataError
from .policy_text import IndicatorScheme, PolicyDocument, Scorecard

AGGREGATION_MODES = ("issue_year_mean", "cumulative_in_force_mean")
SCALING_MODES = ("identity", "divide_by_10")


@dataclass(frozen=True)
class PmcScore:
    """Exact per-primary fractions and their sum for one document."""

    document_id: str
    per_primary: tuple[Fraction, ...]
    pmc_exact: Fraction

    @property
    def pmc(self) -> float:
        return float(self.pmc_exact)

    @property
    def guarantee_exact(self) -> Fraction:
        return Fraction(10) - self.pmc_exact


def pmc_score(card: Scorecard, scheme: IndicatorScheme) -> PmcScore:
    """PMC index of one scorecard; the card must cover every secondary code."""
    missing = card.missing_codes(scheme)
    if missing:
        raise DataError(
            f"scorecard for document {card.document_id!r} is incomplete; "
            f"missing codes: {', '.join(missing)}"
        )
    per_primary = []
    for primary in scheme.primaries:
        hits = sum(card.values[s.code] for s in primary.secondaries)
        per_primary.append(Fraction(hits, len(primary.secondaries)))
    return PmcScore(
        document_id=card.document_id,
        per_primary=tuple(per_primary),
        pmc_exact=sum(per_primary, Fraction(0)),
    )


def guarantee_strength(pmc: float) -> float:
    """G = 10 - PMC; the domain is [0, 10]."""
    if not 0.0 <= pmc <= 10.0:
        raise ValueError(f"PMC must lie in [0, 10], got {pmc}")
    return 10.0 - pmc


@dataclass(frozen=True)
class GuaranteeSeries:
    """Yearly guarantee-strength index G over an inclusive year range.

    ``values`` holds raw G in [0, 10] for every year in range; ``scaling``
    says how values are transformed when joined onto bond data or exported
    for regression use (raw values are what the trend chart shows).
    """

    start: int
    end: int
    values: dict[int, float]
    aggregation_mode: str
    scaling: str = "divide_by_10"

    def __post_init__(self):
        if self.aggregation_mode not in AGGREGATION_MODES:
            raise ValueError(f"unknown aggregation mode {self.aggregation_mode!r}")
        if self.scaling not in SCALING_MODES:
            raise ValueError(f"unknown scaling {self.scaling!r}")
        for year in self.years():
            if year not in self.values:
                raise ValueError(f"series is missing year {year}")
            if not 0.0 <= self.values[year] <= 10.0:
                raise ValueError(f"G({year}) = {self.values[year]} outside [0, 10]")

    def years(self) -> range:
        return range(self.start, self.end + 1)

    def value(self, year: int) -> float:
        if year not in self.values:
            raise DataError(
                f"year {year} not covered by the guarantee series [{self.start}, {self.end}]"
            )
        return self.values[year]

    def scaled_value(self, year: int) -> float:
        raw = self.value(year)
        return raw / 10.0 if self.scaling == "divide_by_10" else raw


def yearly_series(
    scored: list[tuple[PolicyDocument, PmcScore]],
    mode: str = "issue_year_mean",
    scaling: str = "divide_by_10",
    year_range: tuple[int, int] | None = None,
) -> GuaranteeSeries:
    """Aggregate per-document G values into one index value per year.

    issue_year_mean: the mean G over documents issued that year, carrying the
    latest available value forward through document-free years.
    cumulative_in_force_mean: the mean G over all documents issued at or
    before the year.
    """
    if mode not in AGGREGATION_MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    if not scored:
        raise DataError("cannot build a guarantee series from an empty corpus")
    g_by_year: dict[int, list[float]] = {}
    for doc, score in scored:
        g_by_year.setdefault(doc.issue_year, []).append(guarantee_strength(score.pmc))
    for g_list in g_by_year.values():
        g_list.sort()  # bit-exact invariance to within-year document order
    if year_range is None:
        year_range = (min(g_by_year), max(g_by_year))
    start, end = year_range
    if start > end:
        raise ValueError(f"empty year range [{start}, {end}]")
    if min(g_by_year) > start:
        raise DataError(
            f"no document issued at or before the series start {start}; "
            f"earliest document year is {min(g_by_year)}"
        )

    values: dict[int, float] = {}
    if mode == "issue_year_mean":
        last = None
        for year in sorted(set(g_by_year) | set(range(start, end + 1))):
            if year in g_by_year:
                last = sum(g_by_year[year]) / len(g_by_year[year])
            if start <= year <= end:
                values[year] = last
    else:
        pool: list[float] = []
        for year in sorted(set(g_by_year) | set(range(start, end + 1))):
            pool = pool + g_by_year.get(year, [])
            if start <= year <= end:
                values[year] = sum(pool) / len(pool)
    return GuaranteeSeries(
        start=start, end=end, values=values, aggregation_mode=mode, scaling=scaling
    )


def export_series(series: GuaranteeSeries, path, delimiter: str = ",") -> None:
    """Two-column delimited export (year, G), raw scale, full float precision."""
    lines = ["year" + delimiter + "G"]
    lines.extend(f"{year}{delimiter}{series.values[year]!r}" for year in series.years())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
