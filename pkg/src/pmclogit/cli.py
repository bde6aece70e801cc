"""Command-line interface.

Every verb reads the same JSON config (or the shipped synthetic default when
--config is omitted) and honors --seed / --out / --format overrides. Exit
codes: 0 success, 2 config error, 3 data error, 4 non-convergence.
"""

from __future__ import annotations

import csv
import sys

import click

from . import bond_data, pipeline, pmc_index, report, synthetic
from .errors import ConfigError, ConvergenceError, DataError

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NONCONVERGENCE = 4


def _load_config(config_path, seed, out, table_format) -> pipeline.PipelineConfig:
    if config_path is not None:
        cfg = pipeline.PipelineConfig.from_file(config_path)
    else:
        cfg = pipeline.default_config()
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.output_dir = str(out)
    if table_format is not None:
        cfg.table_format = table_format
    cfg.validate()
    return cfg


def _run(action):
    try:
        action()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except ConvergenceError as exc:
        click.echo(f"non-convergence: {exc}", err=True)
        sys.exit(EXIT_NONCONVERGENCE)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)


_shared_options = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="Pipeline config JSON (defaults to the synthetic run)."),
    click.option("--seed", type=int, default=None, help="Override the config seed."),
    click.option("--out", type=click.Path(), default=None, help="Override the output directory."),
    click.option("--format", "table_format", type=click.Choice(report.TABLE_FORMATS),
                 default=None, help="Override the table format."),
]


def _with_shared_options(fn):
    for opt in reversed(_shared_options):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Implicit-guarantee index and ordinal rating estimators."""


def _prepare_corpus(cfg):
    scheme = pipeline._build_scheme(cfg)
    tokenizer = pipeline._tokenizer_for(cfg, scheme)
    docs, _ = pipeline._corpus_documents(cfg, scheme)
    scored = pipeline._score_corpus(docs, scheme, tokenizer)
    return scheme, tokenizer, docs, scored


@main.command("score-corpus")
@_with_shared_options
def score_corpus(config_path, seed, out, table_format):
    """Score the corpus: per-document PMC and G values."""
    def action():
        cfg = _load_config(config_path, seed, out, table_format)
        _, _, docs, scored = _prepare_corpus(cfg)
        out_dir = cfg.resolved_output_dir()
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "document_scores.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["document_id", "issue_year", "pmc", "G"])
            for doc, score in scored:
                writer.writerow(
                    [doc.id, doc.issue_year, repr(score.pmc),
                     repr(pmc_index.guarantee_strength(score.pmc))]
                )
        click.echo(f"scored {len(docs)} documents -> {path}")

    _run(action)


@main.command("series")
@_with_shared_options
def series_cmd(config_path, seed, out, table_format):
    """Build the yearly guarantee-strength series and its chart."""
    def action():
        cfg = _load_config(config_path, seed, out, table_format)
        _, _, _, scored = _prepare_corpus(cfg)
        series = pipeline._build_series(cfg, scored)
        out_dir = cfg.resolved_output_dir()
        out_dir.mkdir(parents=True, exist_ok=True)
        pmc_index.export_series(series, out_dir / "g_series.csv")
        report.emit_series_chart(series, out_dir / "g_series.svg")
        click.echo(f"series {series.start}-{series.end} -> {out_dir}/g_series.csv")

    _run(action)


def _prepare_bonds(cfg):
    _, _, _, scored = _prepare_corpus(cfg)
    series = pipeline._build_series(cfg, scored)
    return series, pipeline._build_bonds(cfg, series)


@main.command("describe")
@_with_shared_options
def describe(config_path, seed, out, table_format):
    """Descriptive statistics, correlations, and the rating-by-year cross-tab."""
    def action():
        cfg = _load_config(config_path, seed, out, table_format)
        _, ds = _prepare_bonds(cfg)
        out_dir = cfg.resolved_output_dir()
        out_dir.mkdir(parents=True, exist_ok=True)
        ext = ".txt" if cfg.table_format == "plain" else ".csv"
        report.emit_table(
            report.descriptive_table(bond_data.descriptive_stats(ds)),
            cfg.table_format, out_dir / f"descriptive{ext}")
        names, corr = bond_data.correlation_matrix(ds)
        report.emit_table(report.correlation_table(names, corr, n_obs=len(ds)),
                          cfg.table_format, out_dir / f"correlation{ext}")
        report.emit_table(report.crosstab_table(bond_data.rating_by_year(ds)),
                          cfg.table_format, out_dir / f"rating_by_year{ext}")
        click.echo(f"described {len(ds)} bonds -> {out_dir}")

    _run(action)


@main.command("fit-olm")
@_with_shared_options
def fit_olm(config_path, seed, out, table_format):
    """Fit the main ordered logit and emit its table and fit file."""
    def action():
        cfg = _load_config(config_path, seed, out, table_format)
        from . import ordered_logit

        _, ds = _prepare_bonds(cfg)
        spec = pipeline._model_spec(cfg)
        fit = pipeline._require_converged(
            ordered_logit.fit(ds, spec, pipeline._fit_options(cfg)), "olm")
        out_dir = cfg.resolved_output_dir()
        out_dir.mkdir(parents=True, exist_ok=True)
        ext = ".txt" if cfg.table_format == "plain" else ".csv"
        report.emit_table(report.olm_table(fit, "Ordered logit: main estimates"),
                          cfg.table_format, out_dir / f"olm_main{ext}")
        fit.save(out_dir / "olm_fit.json")
        click.echo(f"olm: n={fit.n_obs} loglik={fit.loglik:.4f} -> {out_dir}")

    _run(action)


@main.command("fit-mnl")
@_with_shared_options
def fit_mnl(config_path, seed, out, table_format):
    """Fit the multinomial robustness model and compare against the OLM."""
    def action():
        cfg = _load_config(config_path, seed, out, table_format)
        from . import multinomial_logit, ordered_logit

        _, ds = _prepare_bonds(cfg)
        spec = pipeline._model_spec(cfg)
        options = pipeline._fit_options(cfg)
        olm = pipeline._require_converged(ordered_logit.fit(ds, spec, options), "olm")
        mnl = pipeline._require_converged(
            multinomial_logit.mnl_fit(ds, spec, baseline=cfg.mnl_baseline, options=options),
            "mnl")
        table = report.mnl_table(mnl, "Multinomial logit: robustness")
        table.notes.extend(report.comparison_notes(multinomial_logit.compare(olm, mnl)))
        out_dir = cfg.resolved_output_dir()
        out_dir.mkdir(parents=True, exist_ok=True)
        ext = ".txt" if cfg.table_format == "plain" else ".csv"
        report.emit_table(table, cfg.table_format, out_dir / f"mnl_robustness{ext}")
        mnl.save(out_dir / "mnl_fit.json")
        click.echo(f"mnl: n={mnl.n_obs} loglik={mnl.loglik:.4f} -> {out_dir}")

    _run(action)


@main.command("heterogeneity")
@_with_shared_options
def heterogeneity(config_path, seed, out, table_format):
    """Fit the east and central-west subsamples separately."""
    def action():
        cfg = _load_config(config_path, seed, out, table_format)
        _, ds = _prepare_bonds(cfg)
        spec = pipeline._model_spec(cfg)
        results = pipeline.heterogeneity_fits(
            ds, pipeline._region_map(cfg), spec, pipeline._fit_options(cfg))
        out_dir = cfg.resolved_output_dir()
        out_dir.mkdir(parents=True, exist_ok=True)
        ext = ".txt" if cfg.table_format == "plain" else ".csv"
        for region, (fit, note) in results.items():
            table = (report.refusal_table(f"Ordered logit: {region}", note)
                     if fit is None else report.olm_table(fit, f"Ordered logit: {region}"))
            report.emit_table(table, cfg.table_format, out_dir / f"olm_{region}{ext}")
            click.echo(note)

    _run(action)


@main.command("run-all")
@_with_shared_options
def run_all(config_path, seed, out, table_format):
    """Run every stage and write the full report bundle."""
    def action():
        cfg = _load_config(config_path, seed, out, table_format)
        bundle = pipeline.run_pipeline(cfg)
        click.echo(
            f"bundle with {len(bundle.artifact_names())} artifacts -> "
            f"{cfg.resolved_output_dir()}"
        )

    _run(action)


@main.command("simulate")
@_with_shared_options
def simulate(config_path, seed, out, table_format):
    """Write synthetic corpus and bond files in the formats the pipeline ingests."""
    def action():
        cfg = _load_config(config_path, seed, out, table_format)
        scheme, _, docs, scored = _prepare_corpus(cfg)
        series = pipeline._build_series(cfg, scored)
        ds = pipeline._build_bonds(cfg, series)
        out_dir = cfg.resolved_output_dir()
        corpus_dir = out_dir / "corpus"
        corpus_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "corpus_manifest.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "title", "issuing_body", "issue_year", "filename"])
            for doc in docs:
                filename = f"{doc.id}.txt"
                (corpus_dir / filename).write_text(doc.body, encoding="utf-8")
                writer.writerow([doc.id, doc.title, doc.issuing_body, doc.issue_year, filename])
        bond_data.write_bonds_csv(ds, out_dir / "bonds.csv", include_guarantee=True)
        click.echo(
            f"wrote {len(docs)} documents and {len(ds)} bond rows -> {out_dir} "
            f"(generator: {synthetic.GENERATOR_NAME})"
        )

    _run(action)


if __name__ == "__main__":
    main()
