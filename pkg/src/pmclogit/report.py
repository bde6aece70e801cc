"""Report tables and artifact rendering.

Two output formats: ``plain`` (column-aligned text, up to 4 decimals for
coefficients with trailing zeros trimmed, 3 for t- and p-values, matching the
printed-table conventions) and ``delimited`` (CSV, floats at full ``repr``
precision, lossless on re-parse). Significance stars attach to coefficient
cells in both.

The guarantee-series chart is a hand-written SVG so byte output is a pure
function of the series.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .bond_data import CrossTab, StatRow
from .errors import ConfigError
from .multinomial_logit import MnlFit, ModelComparison
from .multinomial_logit import summarize as mnl_summarize
from .ordered_logit import OlmFit, summarize as olm_summarize
from .pmc_index import GuaranteeSeries

TABLE_FORMATS = ("plain", "delimited")


@dataclass(frozen=True)
class Starred:
    """A coefficient cell carrying significance marks."""

    value: float
    stars: str = ""


@dataclass
class Table:
    title: str
    columns: list[str]
    formats: list[str]  # per column: str | int | coef | t | p
    rows: list[list] = field(default_factory=list)
    n_obs: int | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.columns) != len(self.formats):
            raise ValueError("one format per column required")


def _fmt_trim(value: float, places: int) -> str:
    s = f"{value:.{places}f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _fmt_cell_plain(value, fmt: str) -> str:
    if value is None:
        return ""
    if isinstance(value, Starred):
        return _fmt_trim(value.value, 4) + value.stars
    if fmt == "coef":
        return _fmt_trim(float(value), 4)
    if fmt in ("t", "p"):
        return f"{float(value):.3f}"
    if fmt == "int":
        return str(int(value))
    return str(value)


def _fmt_cell_delimited(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Starred):
        return repr(value.value) + value.stars
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_plain(table: Table) -> str:
    header = list(table.columns)
    body = [[_fmt_cell_plain(v, f) for v, f in zip(row, table.formats)] for row in table.rows]
    widths = [
        max(len(header[j]), *(len(r[j]) for r in body)) if body else len(header[j])
        for j in range(len(header))
    ]
    lines = [table.title]
    if table.n_obs is not None:
        lines.append(f"n = {table.n_obs}")
    lines.append("  ".join(h.ljust(w) if j == 0 else h.rjust(w)
                           for j, (h, w) in enumerate(zip(header, widths))))
    lines.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
    for r in body:
        lines.append("  ".join(c.ljust(w) if j == 0 else c.rjust(w)
                               for j, (c, w) in enumerate(zip(r, widths))))
    for note in table.notes:
        lines.append(note)
    return "\n".join(lines) + "\n"


def render_delimited(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt_cell_delimited(v) for v in row])
    return buf.getvalue()


def parse_delimited(text: str) -> tuple[list[str], list[list]]:
    """Inverse of render_delimited: floats come back exactly, stars reattach."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    header, body = rows[0], rows[1:]
    parsed = []
    for row in body:
        out = []
        for cell in row:
            if cell == "":
                out.append(None)
                continue
            stars = len(cell) - len(cell.rstrip("*"))
            core = cell[: len(cell) - stars] if stars else cell
            try:
                value = float(core)
            except ValueError:
                out.append(cell)
                continue
            out.append(Starred(value, "*" * stars) if stars else value)
        parsed.append(out)
    return header, parsed


def emit_table(table: Table, fmt: str, path) -> None:
    """Write one table artifact; ``fmt`` is plain or delimited."""
    if fmt not in TABLE_FORMATS:
        raise ConfigError(f"unknown table format {fmt!r}")
    text = render_plain(table) if fmt == "plain" else render_delimited(table)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# table builders ------------------------------------------------------------

_INFER_COLUMNS = ["variable", "coefficient", "std_err", "t_value", "p_value", "ci_low", "ci_high"]
_INFER_FORMATS = ["str", "coef", "coef", "t", "p", "coef", "coef"]


def olm_table(fit: OlmFit, title: str = "Ordered logit estimates") -> Table:
    """Main-results shape: starred coefficient rows, then cutpoint rows."""
    rows = []
    for r in olm_summarize(fit):
        if r.stars is None:  # cutpoints: no stars, no t/p columns
            rows.append([r.name, Starred(r.coefficient), r.std_error, None, None,
                         r.ci_low, r.ci_high])
        else:
            rows.append([r.name, Starred(r.coefficient, r.stars), r.std_error,
                         r.t_value, r.p_value, r.ci_low, r.ci_high])
    pseudo = 1.0 - fit.loglik / fit.loglik_null
    return Table(
        title=title,
        columns=list(_INFER_COLUMNS),
        formats=list(_INFER_FORMATS),
        rows=rows,
        n_obs=fit.n_obs,
        notes=[
            f"log-likelihood = {fit.loglik:.4f}",
            f"McFadden pseudo R2 = {pseudo:.4f}",
            f"link = {fit.spec.link}; SEs: {fit.vcov_kind}",
        ],
    )


def mnl_table(fit: MnlFit, title: str = "Multinomial logit estimates") -> Table:
    """Robustness-table shape: one (category, coefficient, se, signif) block per
    non-baseline category, side by side, plus baseline note and pseudo R2."""
    blocks = mnl_summarize(fit)
    cats = fit.params.categories
    columns = ["variable"]
    formats = ["str"]
    for _ in cats:
        columns += ["category", "coefficient", "std_err", "signif"]
        formats += ["int", "coef", "coef", "str"]
    rows = []
    names = ["Constant"] + list(fit.spec.covariates)
    for name in names[1:] + [names[0]]:  # covariates first, Constant last
        row = [name]
        for c in cats:
            r = next(b for b in blocks[c] if b.name == name)
            row += [c, Starred(r.coefficient, r.stars or ""), r.std_error, r.stars or ""]
        rows.append(row)
    pseudo = 1.0 - fit.loglik / fit.loglik_null
    return Table(
        title=title,
        columns=columns,
        formats=formats,
        rows=rows,
        n_obs=fit.n_obs,
        notes=[
            f"baseline group = {fit.params.baseline}",
            f"McFadden pseudo R2 = {pseudo:.4f}",
        ],
    )


def comparison_notes(cmp: ModelComparison) -> list[str]:
    """Descriptive OLM-vs-MNL deltas appended to the robustness artifact."""
    notes = [
        f"pseudo R2: ordered {cmp.pseudo_r2_olm:.4f} vs multinomial {cmp.pseudo_r2_mnl:.4f}",
    ]
    for row in cmp.rows:
        for c in sorted(row.blocks):
            change = row.significance_change[c]
            if change != "unchanged":
                notes.append(f"{row.name} [category {c}]: significance {change}")
            if row.sign_flip[c]:
                notes.append(
                    f"{row.name} [category {c}]: sign disagrees with the ordered fit "
                    "after orienting against the baseline"
                )
    return notes


def descriptive_table(stats: list[StatRow], title: str = "Descriptive statistics") -> Table:
    return Table(
        title=title,
        columns=["variable", "N", "Mean", "Std.dev.", "Min", "Max"],
        formats=["str", "int", "coef", "coef", "coef", "coef"],
        rows=[[s.name, s.n, s.mean, s.std, s.min, s.max] for s in stats],
        n_obs=stats[0].n if stats else None,
    )


def correlation_table(names: list[str], corr: np.ndarray,
                      title: str = "Correlation matrix", n_obs: int | None = None) -> Table:
    rows = []
    for i, name in enumerate(names):
        row = [name] + [float(corr[i, j]) if j <= i else None for j in range(len(names))]
        rows.append(row)
    return Table(
        title=title,
        columns=["variable"] + list(names),
        formats=["str"] + ["coef"] * len(names),
        rows=rows,
        n_obs=n_obs,
    )


def crosstab_table(ct: CrossTab, title: str = "Rating distribution by year") -> Table:
    columns = ["rating"] + [str(y) for y in ct.years] + ["Total"]
    rows = []
    for i, label in enumerate(ct.labels):
        rows.append([label] + [int(c) for c in ct.cells[i]] + [int(ct.row_totals[i])])
    rows.append(["Total"] + [int(c) for c in ct.col_totals] + [ct.total])
    return Table(
        title=title,
        columns=columns,
        formats=["str"] + ["int"] * (len(ct.years) + 1),
        rows=rows,
        n_obs=ct.total,
    )


def refusal_table(title: str, reason: str) -> Table:
    """Placeholder artifact for a stage that refused to run (and says why)."""
    return Table(
        title=title,
        columns=["variable", "coefficient"],
        formats=["str", "coef"],
        rows=[],
        notes=[f"REFUSED: {reason}"],
    )


# series chart ---------------------------------------------------------------

_SVG_W, _SVG_H = 640, 400
_MARGIN = 56


def render_series_svg(series: GuaranteeSeries) -> str:
    """Line chart of the yearly index, year on x, raw G on y. Deterministic."""
    years = list(series.years())
    values = [series.values[y] for y in years]
    lo, hi = min(values), max(values)
    pad = (hi - lo) * 0.1 or 0.5
    lo, hi = lo - pad, hi + pad
    x0, x1 = _MARGIN, _SVG_W - _MARGIN
    y0, y1 = _SVG_H - _MARGIN, _MARGIN

    def sx(year):
        if len(years) == 1:
            return (x0 + x1) / 2
        return x0 + (x1 - x0) * (year - years[0]) / (years[-1] - years[0])

    def sy(v):
        return y0 - (y0 - y1) * (v - lo) / (hi - lo)

    points = " ".join(f"{sx(y):.2f},{sy(v):.2f}" for y, v in zip(years, values))
    tick_step = max(1, len(years) // 8)
    ticks = years[::tick_step]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<polyline fill="none" stroke="#1f4e79" stroke-width="2" points="{points}"/>',
    ]
    for y, v in zip(years, values):
        parts.append(f'<circle cx="{sx(y):.2f}" cy="{sy(v):.2f}" r="3" fill="#1f4e79"/>')
    for y in ticks:
        parts.append(
            f'<text x="{sx(y):.2f}" y="{y0 + 18}" font-size="11" text-anchor="middle">{y}</text>'
        )
    for v in (min(values), max(values)):
        parts.append(
            f'<text x="{x0 - 6}" y="{sy(v):.2f}" font-size="11" text-anchor="end">{v:.2f}</text>'
        )
    parts.append(
        f'<text x="{(x0 + x1) / 2:.2f}" y="{y1 - 28}" font-size="13" text-anchor="middle">'
        "Implicit guarantee strength index G by year</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_series_chart(series: GuaranteeSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_series_svg(series))
