"""Bond issuance records: ingestion, cleaning, descriptives, and sample splits.

Ratings are encoded best-to-worst: AAA -> 1, AA+ -> 2, AA -> 3. Only these
three grades are admitted (municipal investment bonds carry at least an AA
rating); anything else is rejected.

Cleaning on load drops rows with missing model fields (counted per column)
and then applies a one-pass outlier rule: a row is dropped when any numeric
covariate falls outside [Q1 - 3*IQR, Q3 + 3*IQR] computed on the surviving
rows. Both drop counts are reported so attrition is auditable.

Datasets are immutable after load; all derived computations are pure.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .pmc_index import GuaranteeSeries

RATING_CODES = {"AAA": 1, "AA+": 2, "AA": 3}
RATING_LABELS = {v: k for k, v in RATING_CODES.items()}

# Table-order conventions used by the report tables
COVARIATE_ORDER = ("im_guarantee", "amount", "term", "option", "ROA", "DTA", "AT", "GDP_growth")
DESCRIPTIVE_ORDER = ("i_ra",) + COVARIATE_ORDER

REQUIRED_FIELDS = (
    "bond_id", "issue_year", "rating_label", "amount", "term", "option",
    "ROA", "DTA", "AT", "GDP_growth", "province", "issuer_id",
)
NUMERIC_FIELDS = ("amount", "term", "option", "ROA", "DTA", "AT", "GDP_growth")

EAST_REGION = "east"
CENTRAL_WEST_REGION = "central_west"


def encode_rating(label: str) -> int:
    """AAA -> 1, AA+ -> 2, AA -> 3."""
    try:
        return RATING_CODES[label]
    except KeyError:
        raise DataError(
            f"rating {label!r} not admitted: municipal investment bonds carry "
            "at least an AA rating (admitted grades: AAA, AA+, AA)"
        ) from None


def decode_rating(code: int) -> str:
    try:
        return RATING_LABELS[code]
    except KeyError:
        raise DataError(f"rating code {code} not in 1..3") from None


@dataclass(frozen=True)
class BondRecord:
    bond_id: str
    issue_year: int
    rating_label: str
    amount: float
    term: float
    option: int
    ROA: float
    DTA: float
    AT: float
    GDP_growth: float
    province: str
    issuer_id: str
    im_guarantee: float | None = None


@dataclass(frozen=True)
class LoadReport:
    """Per-column attrition accounting for one load."""

    n_read: int
    n_kept: int
    rejected_lines: tuple[tuple[int, str], ...] = ()
    missing_drops: dict[str, int] = field(default_factory=dict)
    outlier_drops: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_read": self.n_read,
            "n_kept": self.n_kept,
            "rejected_lines": [list(r) for r in self.rejected_lines],
            "missing_drops": dict(self.missing_drops),
            "outlier_drops": dict(self.outlier_drops),
        }


@dataclass(frozen=True)
class BondDataset:
    """Immutable collection of bond records with named column access."""

    rows: tuple[BondRecord, ...]
    load_report: LoadReport | None = None

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self) -> int:
        return len(self.rows)

    @classmethod
    def from_records(cls, records, load_report: LoadReport | None = None) -> "BondDataset":
        return cls(rows=tuple(records), load_report=load_report)

    def column(self, name: str) -> np.ndarray:
        if not self.rows:
            raise DataError("empty dataset")
        if name == "i_ra":
            return np.array([encode_rating(r.rating_label) for r in self.rows], dtype=np.int64)
        if name == "im_guarantee":
            vals = [r.im_guarantee for r in self.rows]
            if any(v is None for v in vals):
                raise DataError(
                    "im_guarantee is not attached to every row; run join_guarantee first"
                )
            return np.array(vals, dtype=np.float64)
        if name == "issue_year":
            return np.array([r.issue_year for r in self.rows], dtype=np.int64)
        if name in NUMERIC_FIELDS:
            return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)
        if name in ("bond_id", "rating_label", "province", "issuer_id"):
            return np.array([getattr(r, name) for r in self.rows], dtype=object)
        raise DataError(f"unknown column {name!r}")

    def has_im_guarantee(self) -> bool:
        return bool(self.rows) and all(r.im_guarantee is not None for r in self.rows)


def _parse_float(cell: str, column: str, line_no: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise _RowRejected(line_no, f"unparseable numeric cell in column {column!r}: {cell!r}") from None


class _RowRejected(Exception):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(reason)


def load_schema_config(path) -> dict:
    """Schema config JSON: {"delimiter": ",", "columns": {standard: actual}}."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict):
        raise DataError("schema config must be a JSON object")
    return payload


def load_bonds(path, schema: dict | None = None) -> BondDataset:
    """Load a delimited bond file, dropping and counting bad rows.

    ``schema`` may rename file columns ({"columns": {standard: actual}}) and
    set the delimiter (default comma). An ``im_guarantee`` column is used
    when present; otherwise it is attached later by ``join_guarantee``.
    """
    schema = schema or {}
    delimiter = schema.get("delimiter", ",")
    colmap = dict(schema.get("columns", {}))
    path = Path(path)

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        names = {std: colmap.get(std, std) for std in REQUIRED_FIELDS + ("im_guarantee",)}
        missing_cols = [names[std] for std in REQUIRED_FIELDS if names[std] not in header]
        if missing_cols:
            raise DataError(f"bond file {path} missing required columns: {', '.join(missing_cols)}")
        has_guarantee_col = names["im_guarantee"] in header

        records: list[BondRecord] = []
        rejected: list[tuple[int, str]] = []
        missing_drops: dict[str, int] = {}
        n_read = 0
        numeric = NUMERIC_FIELDS + (("im_guarantee",) if has_guarantee_col else ())
        for line_no, row in enumerate(reader, start=2):
            n_read += 1
            try:
                missing = [
                    std for std in REQUIRED_FIELDS + (("im_guarantee",) if has_guarantee_col else ())
                    if not (row.get(names[std]) or "").strip()
                ]
                if missing:
                    for std in missing:
                        missing_drops[std] = missing_drops.get(std, 0) + 1
                    continue
                label = row[names["rating_label"]].strip()
                if label not in RATING_CODES:
                    raise _RowRejected(
                        line_no,
                        f"rating {label!r} not admitted (at least AA required)",
                    )
                try:
                    year = int(row[names["issue_year"]])
                except ValueError:
                    raise _RowRejected(
                        line_no, f"unparseable issue_year {row[names['issue_year']]!r}"
                    ) from None
                values = {
                    std: _parse_float(row[names[std]].strip(), std, line_no) for std in numeric
                }
                option = values["option"]
                if option not in (0.0, 1.0):
                    raise _RowRejected(line_no, f"option must be 0 or 1, got {option}")
                if values["term"] <= 0:
                    raise _RowRejected(line_no, f"term must be positive, got {values['term']}")
                records.append(
                    BondRecord(
                        bond_id=row[names["bond_id"]].strip(),
                        issue_year=year,
                        rating_label=label,
                        amount=values["amount"],
                        term=values["term"],
                        option=int(option),
                        ROA=values["ROA"],
                        DTA=values["DTA"],
                        AT=values["AT"],
                        GDP_growth=values["GDP_growth"],
                        province=row[names["province"]].strip(),
                        issuer_id=row[names["issuer_id"]].strip(),
                        im_guarantee=values.get("im_guarantee"),
                    )
                )
            except _RowRejected as rej:
                rejected.append((rej.line_no, rej.reason))

    records, outlier_drops = _apply_outlier_fences(records, numeric)
    report = LoadReport(
        n_read=n_read,
        n_kept=len(records),
        rejected_lines=tuple(rejected),
        missing_drops=missing_drops,
        outlier_drops=outlier_drops,
    )
    return BondDataset.from_records(records, load_report=report)


def _apply_outlier_fences(records, numeric_fields):
    """One-pass 3*IQR fences per continuous covariate; returns survivors and counts.

    The binary option column is exempt: with a level share under 25% its IQR
    collapses to zero and the fence would discard an entire level.
    """
    if not records:
        return records, {}
    numeric_fields = [f for f in numeric_fields if f != "option"]
    fences = {}
    for name in numeric_fields:
        col = np.array(
            [getattr(r, name) if name != "im_guarantee" else r.im_guarantee for r in records],
            dtype=np.float64,
        )
        q1, q3 = np.percentile(col, [25.0, 75.0])
        iqr = q3 - q1
        fences[name] = (q1 - 3.0 * iqr, q3 + 3.0 * iqr)
    outlier_drops: dict[str, int] = {}
    kept = []
    for r in records:
        bad = False
        for name, (lo, hi) in fences.items():
            v = getattr(r, name) if name != "im_guarantee" else r.im_guarantee
            if not lo <= v <= hi:
                outlier_drops[name] = outlier_drops.get(name, 0) + 1
                bad = True
        if not bad:
            kept.append(r)
    return kept, outlier_drops


@dataclass(frozen=True)
class StatRow:
    name: str
    n: int
    mean: float
    std: float
    min: float
    max: float


def descriptive_stats(ds: BondDataset, columns=None) -> list[StatRow]:
    """Per-variable N / mean / sample std (n-1) / min / max, report order."""
    if not len(ds):
        raise DataError("empty dataset")
    if columns is None:
        columns = [c for c in DESCRIPTIVE_ORDER if c != "im_guarantee" or ds.has_im_guarantee()]
    rows = []
    for name in columns:
        col = np.asarray(ds.column(name), dtype=np.float64)
        std = float(col.std(ddof=1)) if len(col) > 1 else 0.0
        rows.append(
            StatRow(
                name=name,
                n=len(col),
                mean=float(col.mean()),
                std=std,
                min=float(col.min()),
                max=float(col.max()),
            )
        )
    return rows


def correlation_matrix(ds: BondDataset, columns=None) -> tuple[list[str], np.ndarray]:
    """Pearson correlations over the model covariates (unit diagonal)."""
    columns = list(columns) if columns is not None else list(COVARIATE_ORDER)
    mat = np.column_stack([np.asarray(ds.column(c), dtype=np.float64) for c in columns])
    for j, name in enumerate(columns):
        if np.std(mat[:, j]) == 0.0:
            raise DataError(f"cannot correlate constant column {name!r}")
    corr = np.corrcoef(mat, rowvar=False)
    np.fill_diagonal(corr, 1.0)
    return columns, corr


@dataclass(frozen=True)
class CrossTab:
    """Rating-by-year counts with row/column margins."""

    labels: tuple[str, ...]
    years: tuple[int, ...]
    cells: np.ndarray  # (len(labels), len(years)) int64
    row_totals: np.ndarray
    col_totals: np.ndarray
    total: int


def rating_by_year(ds: BondDataset, year_range: tuple[int, int] | None = None) -> CrossTab:
    """Cross-tab of rating grade by issue year.

    Years without observations appear only when an explicit range asks for
    zero-filled columns.
    """
    years_col = ds.column("issue_year")
    codes = ds.column("i_ra")
    if year_range is not None:
        years = tuple(range(year_range[0], year_range[1] + 1))
    else:
        years = tuple(sorted(set(int(y) for y in years_col)))
    labels = ("AAA", "AA+", "AA")
    cells = np.zeros((len(labels), len(years)), dtype=np.int64)
    index = {y: j for j, y in enumerate(years)}
    for code, year in zip(codes, years_col):
        j = index.get(int(year))
        if j is not None:
            cells[code - 1, j] += 1
    return CrossTab(
        labels=labels,
        years=years,
        cells=cells,
        row_totals=cells.sum(axis=1),
        col_totals=cells.sum(axis=0),
        total=int(cells.sum()),
    )


@dataclass(frozen=True)
class RegionMap:
    """Province -> region assignment with an optional default region."""

    mapping: dict[str, str]
    default: str | None = None

    def region_of(self, province: str) -> str:
        region = self.mapping.get(province, self.default)
        if region is None:
            raise DataError(f"province {province!r} not covered by the region map")
        return region


def load_region_map(path) -> RegionMap:
    """Region map JSON: {"regions": {"east": [...], "central_west": [...]}, "default": ...}."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    regions = payload.get("regions", {})
    mapping = {}
    for region, provinces in regions.items():
        if region not in (EAST_REGION, CENTRAL_WEST_REGION):
            raise DataError(f"unknown region {region!r} (expected east / central_west)")
        for p in provinces:
            mapping[p] = region
    return RegionMap(mapping=mapping, default=payload.get("default"))


def default_region_map() -> RegionMap:
    """Conventional east-coast province list; everything else central_west."""
    from importlib import resources

    with resources.files("pmclogit.data").joinpath("default_regions.json").open(
        encoding="utf-8"
    ) as fh:
        payload = json.load(fh)
    mapping = {p: EAST_REGION for p in payload["regions"]["east"]}
    return RegionMap(mapping=mapping, default=payload.get("default"))


def split_region(ds: BondDataset, region_map: RegionMap) -> tuple[BondDataset, BondDataset]:
    """Partition into (east, central_west); every province must be mapped."""
    if region_map.default is None:
        unmapped = sorted({r.province for r in ds.rows} - set(region_map.mapping))
        if unmapped:
            raise DataError(f"provinces not covered by the region map: {', '.join(unmapped)}")
    east = [r for r in ds.rows if region_map.region_of(r.province) == EAST_REGION]
    west = [r for r in ds.rows if region_map.region_of(r.province) == CENTRAL_WEST_REGION]
    return BondDataset.from_records(east), BondDataset.from_records(west)


def join_guarantee(ds: BondDataset, series: GuaranteeSeries) -> BondDataset:
    """Attach im_guarantee = scaled G(issue_year) to every row."""
    years = sorted({r.issue_year for r in ds.rows})
    uncovered = [y for y in years if not (series.start <= y <= series.end)]
    if uncovered:
        raise DataError(
            f"guarantee series [{series.start}, {series.end}] does not cover issue years: "
            f"{', '.join(map(str, uncovered))}"
        )
    by_year = {y: series.scaled_value(y) for y in years}
    return BondDataset.from_records(
        [replace(r, im_guarantee=by_year[r.issue_year]) for r in ds.rows],
        load_report=ds.load_report,
    )


def write_bonds_csv(ds: BondDataset, path, include_guarantee: bool = False) -> None:
    """Write records in the same format load_bonds ingests."""
    fields = list(REQUIRED_FIELDS)
    if include_guarantee:
        fields.append("im_guarantee")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for r in ds.rows:
            writer.writerow([getattr(r, f) for f in fields])
