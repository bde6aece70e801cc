"""End-to-end pipeline: corpus -> G series -> join -> fits -> report bundle.

A run computes every artifact in memory first and writes the bundle only
when all stages succeeded, so partial bundles never land on disk. All
randomness flows from the single config seed (stages derive Philox keys from
fixed labels), the estimators canonicalize row order and reduce chunks in a
fixed tree, and the manifest stores no wall-clock, worker count, or absolute
path: a fixed (config, seed) is byte-reproducible across runs and across
worker counts.
"""

from __future__ import annotations

import hashlib
import json
import os
import platform
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from . import bond_data, multinomial_logit, ordered_logit, pmc_index, policy_text, report
from . import synthetic
from .errors import ConfigError, ConvergenceError, PmcLogitError

OUTPUT_DIR_ENV = "PMCLOGIT_OUT"

_DEFAULT_COVARIATES = list(bond_data.COVARIATE_ORDER)


@dataclass
class PipelineConfig:
    """Validated pipeline settings; see ``default_config`` for the synthetic run."""

    seed: int = 20240801
    output_dir: str = "pmclogit_out"
    table_format: str = "plain"  # plain | delimited
    n_workers: int = 1
    corpus: dict = field(default_factory=lambda: {
        "mode": "synthetic",
        "year_range": [2008, 2024],
        "docs_per_year": 2,
        "inclusion_start": 0.5,
        "inclusion_end": 0.75,
    })
    scheme_path: str | None = None
    tokenizer: dict | None = None
    series: dict = field(default_factory=lambda: {
        "aggregation": "issue_year_mean",
        "scaling": "divide_by_10",
        "year_range": [2008, 2024],
    })
    bonds: dict = field(default_factory=lambda: {"mode": "synthetic", "n": 4000})
    region_map_path: str | None = None
    model: dict = field(default_factory=lambda: {
        "response": "i_ra",
        "covariates": list(_DEFAULT_COVARIATES),
        "n_categories": 3,
        "link": "logit",
    })
    options: dict = field(default_factory=dict)
    mnl_baseline: int = 2
    stages: dict = field(default_factory=lambda: {"mnl": True, "heterogeneity": True})

    _KNOWN = (
        "seed", "output_dir", "table_format", "n_workers", "corpus", "scheme_path",
        "tokenizer", "series", "bonds", "region_map_path", "model", "options",
        "mnl_baseline", "stages",
    )

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        unknown = sorted(set(payload) - set(cls._KNOWN))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**payload)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(payload)

    def validate(self) -> None:
        if self.table_format not in report.TABLE_FORMATS:
            raise ConfigError(f"table_format must be one of {report.TABLE_FORMATS}")
        if self.n_workers < 1:
            raise ConfigError("n_workers must be >= 1")
        if self.corpus.get("mode") not in ("synthetic", "files"):
            raise ConfigError("corpus.mode must be 'synthetic' or 'files'")
        if self.bonds.get("mode") not in ("synthetic", "files"):
            raise ConfigError("bonds.mode must be 'synthetic' or 'files'")
        if self.model.get("n_categories") != 3:
            raise ConfigError("the report pipeline is defined for 3 rating categories")
        if self.series.get("aggregation", "issue_year_mean") not in pmc_index.AGGREGATION_MODES:
            raise ConfigError(f"unknown series aggregation {self.series.get('aggregation')!r}")
        if self.series.get("scaling", "divide_by_10") not in pmc_index.SCALING_MODES:
            raise ConfigError(f"unknown series scaling {self.series.get('scaling')!r}")
        for path_key, value in (
            ("scheme_path", self.scheme_path),
            ("region_map_path", self.region_map_path),
        ):
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{path_key} does not exist: {value}")
        if self.corpus["mode"] == "files":
            for key in ("directory", "manifest"):
                if key not in self.corpus:
                    raise ConfigError(f"corpus.mode=files needs corpus.{key}")
                if not Path(self.corpus[key]).exists():
                    raise ConfigError(f"corpus.{key} does not exist: {self.corpus[key]}")
        if self.bonds["mode"] == "files":
            if "path" not in self.bonds:
                raise ConfigError("bonds.mode=files needs bonds.path")
            if not Path(self.bonds["path"]).exists():
                raise ConfigError(f"bonds.path does not exist: {self.bonds['path']}")

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)

    def digest(self) -> str:
        """Content hash of everything that shapes results.

        output_dir and n_workers are excluded: neither affects the computed
        artifacts (chunk reduction order is fixed), and the bundle must be
        byte-identical across worker counts.
        """
        payload = asdict(self)
        payload.pop("output_dir")
        payload.pop("n_workers")
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def default_config(seed: int = 20240801, output_dir: str = "pmclogit_out") -> PipelineConfig:
    """The shipped synthetic end-to-end configuration."""
    return PipelineConfig(seed=seed, output_dir=output_dir)


@dataclass
class ReportBundle:
    """All pipeline artifacts, in memory, plus the run manifest."""

    tables: dict[str, report.Table]
    series: pmc_index.GuaranteeSeries
    olm_fit: ordered_logit.OlmFit
    mnl_fit: multinomial_logit.MnlFit | None
    manifest: dict
    table_format: str = "plain"

    def artifact_names(self) -> list[str]:
        ext = ".txt" if self.table_format == "plain" else ".csv"
        names = [name + ext for name in self.tables]
        names += ["g_series.csv", "g_series.svg", "olm_fit.json"]
        if self.mnl_fit is not None:
            names.append("mnl_fit.json")
        names.append("manifest.json")
        return sorted(names)

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ext = ".txt" if self.table_format == "plain" else ".csv"
        written = []
        for name, table in self.tables.items():
            path = out / (name + ext)
            report.emit_table(table, self.table_format, path)
            written.append(path)
        pmc_index.export_series(self.series, out / "g_series.csv")
        report.emit_series_chart(self.series, out / "g_series.svg")
        self.olm_fit.save(out / "olm_fit.json")
        written += [out / "g_series.csv", out / "g_series.svg", out / "olm_fit.json"]
        if self.mnl_fit is not None:
            self.mnl_fit.save(out / "mnl_fit.json")
            written.append(out / "mnl_fit.json")
        with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(out / "manifest.json")
        return written


def _build_scheme(cfg: PipelineConfig) -> policy_text.IndicatorScheme:
    if cfg.scheme_path is not None:
        return policy_text.load_scheme(cfg.scheme_path)
    return policy_text.default_scheme()


def _tokenizer_for(cfg: PipelineConfig, scheme) -> policy_text.TokenizerConfig:
    if cfg.tokenizer is None:
        return policy_text.default_tokenizer_for(scheme)
    t = dict(cfg.tokenizer)
    mode = t.get("mode", "dictionary")
    if mode == "dictionary" and not t.get("dictionary"):
        t["dictionary"] = scheme.dictionary()
    return policy_text.TokenizerConfig(
        mode=mode,
        ngram=t.get("ngram", 2),
        dictionary=tuple(t.get("dictionary", ())),
        case_folding=t.get("case_folding", True),
        min_token_length=t.get("min_token_length", 1),
    )


def _corpus_documents(cfg: PipelineConfig, scheme):
    if cfg.corpus["mode"] == "files":
        docs = policy_text.load_corpus(cfg.corpus["directory"], cfg.corpus["manifest"])
        return docs, None
    year_range = tuple(cfg.corpus.get("year_range", [2008, 2024]))
    dgp = synthetic.CorpusDgp(
        scheme=scheme,
        docs_per_year=int(cfg.corpus.get("docs_per_year", 2)),
        inclusion_by_year=synthetic.linear_inclusion_schedule(
            year_range,
            float(cfg.corpus.get("inclusion_start", 0.5)),
            float(cfg.corpus.get("inclusion_end", 0.75)),
        ),
        seed=cfg.seed,
    )
    pairs = synthetic.simulate_policies(dgp)
    return [doc for doc, _ in pairs], dgp


def _score_corpus(docs, scheme, tokenizer):
    scored = []
    for doc in docs:
        card = policy_text.score_document(doc, scheme, tokenizer)
        scored.append((doc, pmc_index.pmc_score(card, scheme)))
    return scored


def _build_series(cfg: PipelineConfig, scored) -> pmc_index.GuaranteeSeries:
    s = cfg.series
    year_range = s.get("year_range")
    return pmc_index.yearly_series(
        scored,
        mode=s.get("aggregation", "issue_year_mean"),
        scaling=s.get("scaling", "divide_by_10"),
        year_range=tuple(year_range) if year_range else None,
    )


def _build_bonds(cfg: PipelineConfig, series) -> bond_data.BondDataset:
    if cfg.bonds["mode"] == "files":
        schema = None
        if cfg.bonds.get("schema_path"):
            schema = bond_data.load_schema_config(cfg.bonds["schema_path"])
        ds = bond_data.load_bonds(cfg.bonds["path"], schema)
        if not len(ds):
            from .errors import DataError

            raise DataError(
                f"bond file {cfg.bonds['path']} yielded no usable rows after cleaning"
            )
    else:
        dgp = synthetic.facsimile_dgp(
            n=int(cfg.bonds.get("n", 4000)), seed=cfg.seed, im_guarantee_from_series=True
        )
        ds = synthetic.simulate_bonds(dgp, series)
    return bond_data.join_guarantee(ds, series)


def _region_map(cfg: PipelineConfig) -> bond_data.RegionMap:
    if cfg.region_map_path is not None:
        return bond_data.load_region_map(cfg.region_map_path)
    return bond_data.default_region_map()


def _model_spec(cfg: PipelineConfig) -> ordered_logit.OlmSpec:
    m = cfg.model
    return ordered_logit.OlmSpec(
        response=m.get("response", "i_ra"),
        covariates=tuple(m.get("covariates", _DEFAULT_COVARIATES)),
        n_categories=int(m.get("n_categories", 3)),
        link=m.get("link", "logit"),
    )


def _fit_options(cfg: PipelineConfig) -> ordered_logit.FitOptions:
    o = cfg.options
    return ordered_logit.FitOptions(
        max_iter=int(o.get("max_iter", 200)),
        gradient_tol=float(o.get("gradient_tol", 1e-8)),
        loglik_rel_tol=float(o.get("loglik_rel_tol", 1e-12)),
        n_workers=cfg.n_workers,
        cluster=o.get("cluster"),
    )


@contextmanager
def _stage(name: str, hint: str):
    """Prefix toolkit errors with the failing stage and a remediation hint."""
    try:
        yield
    except PmcLogitError as exc:
        exc.args = (f"[stage {name}] {exc.args[0]} (hint: {hint})",) + exc.args[1:]
        raise


def _require_converged(fit, stage: str):
    if not fit.converged:
        raise ConvergenceError(
            f"stage {stage!r}: estimator did not converge in {fit.iterations} iterations; "
            "raise options.max_iter or inspect the data for separation"
        )
    return fit


def guarantee_magnitude_comparison(results, spec) -> str | None:
    """Qualitative |beta_im_guarantee| comparison across the two regions.

    Purely descriptive: reports which region shows the larger magnitude
    without asserting any expected direction.
    """
    if "im_guarantee" not in spec.covariates:
        return None
    j = list(spec.covariates).index("im_guarantee")
    betas = {}
    for region, (fit, _) in results.items():
        if fit is not None:
            betas[region] = float(fit.params.beta[j])
    if set(betas) != {bond_data.EAST_REGION, bond_data.CENTRAL_WEST_REGION}:
        return None
    east_b, west_b = betas[bond_data.EAST_REGION], betas[bond_data.CENTRAL_WEST_REGION]
    larger = "central_west" if abs(west_b) > abs(east_b) else "east"
    return (
        f"|beta_im_guarantee|: east {abs(east_b):.4f} vs central_west "
        f"{abs(west_b):.4f}; larger magnitude: {larger}"
    )


def heterogeneity_fits(ds, region_map, spec, options):
    """Per-region OLM fits; a region missing a rating category is refused.

    Returns {region: (fit or None, note)} for east and central_west.
    """
    east, west = bond_data.split_region(ds, region_map)
    out = {}
    for region, part in ((bond_data.EAST_REGION, east), (bond_data.CENTRAL_WEST_REGION, west)):
        if not len(part):
            out[region] = (None, f"{region}: no observations in this region")
            continue
        codes = part.column("i_ra")
        counts = np.bincount(codes, minlength=spec.n_categories + 1)[1:]
        if np.any(counts == 0):
            missing = [str(c + 1) for c in range(spec.n_categories) if counts[c] == 0]
            out[region] = (
                None,
                f"{region}: subsample lacks rating categories {', '.join(missing)}; "
                "refusing to refit with fewer categories",
            )
            continue
        fit = ordered_logit.fit(part, spec, options)
        _require_converged(fit, f"heterogeneity[{region}]")
        out[region] = (fit, f"{region}: n = {fit.n_obs}")
    return out


def run_pipeline(cfg: PipelineConfig, write: bool = True) -> ReportBundle:
    """Execute all configured stages; write the bundle only if all succeed."""
    with _stage("score-corpus", "check the scheme file and corpus manifest"):
        scheme = _build_scheme(cfg)
        tokenizer = _tokenizer_for(cfg, scheme)
        docs, _ = _corpus_documents(cfg, scheme)
        scored = _score_corpus(docs, scheme, tokenizer)
    with _stage("series", "widen series.year_range or add earlier documents"):
        series = _build_series(cfg, scored)
    with _stage("bonds", "check the bond file, schema config, and series coverage"):
        ds = _build_bonds(cfg, series)
    spec = _model_spec(cfg)
    options = _fit_options(cfg)

    tables: dict[str, report.Table] = {}
    with _stage("describe", "inspect the loaded columns for constants or gaps"):
        tables["descriptive"] = report.descriptive_table(bond_data.descriptive_stats(ds))
        names, corr = bond_data.correlation_matrix(ds)
        tables["correlation"] = report.correlation_table(names, corr, n_obs=len(ds))
        tables["rating_by_year"] = report.crosstab_table(bond_data.rating_by_year(ds))

    with _stage("olm", "check category coverage and covariate collinearity"):
        olm_fit = _require_converged(ordered_logit.fit(ds, spec, options), "olm")
    tables["olm_main"] = report.olm_table(olm_fit, "Ordered logit: main estimates")

    mnl_fit = None
    if cfg.stages.get("mnl", True):
        with _stage("mnl", "check category coverage and covariate collinearity"):
            # cluster-robust SEs are an ordered-model option; the MNL stage
            # always reports classical SEs
            mnl_options = replace(options, cluster=None)
            mnl_fit = _require_converged(
                multinomial_logit.mnl_fit(ds, spec, baseline=cfg.mnl_baseline,
                                          options=mnl_options),
                "mnl",
            )
        table = report.mnl_table(mnl_fit, "Multinomial logit: robustness")
        table.notes.extend(report.comparison_notes(multinomial_logit.compare(olm_fit, mnl_fit)))
        tables["mnl_robustness"] = table

    het_diag = {}
    if cfg.stages.get("heterogeneity", True):
        with _stage("heterogeneity", "check the region map covers every province"):
            region_map = _region_map(cfg)
            results = heterogeneity_fits(ds, region_map, spec, options)
        for region, (fit, note) in results.items():
            name = f"olm_{region}"
            if fit is None:
                tables[name] = report.refusal_table(f"Ordered logit: {region}", note)
                het_diag[region] = {"refused": note}
            else:
                tables[name] = report.olm_table(fit, f"Ordered logit: {region}")
                het_diag[region] = {
                    "n_obs": fit.n_obs,
                    "iterations": fit.iterations,
                    "beta_im_guarantee": (
                        float(fit.params.beta[list(spec.covariates).index("im_guarantee")])
                        if "im_guarantee" in spec.covariates
                        else None
                    ),
                }
        note = guarantee_magnitude_comparison(results, spec)
        if note is not None:
            tables["olm_east"].notes.append(note)
            tables["olm_central_west"].notes.append(note)
            het_diag["magnitude_comparison"] = note

    manifest = {
        "package_version": __version__,
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
        "kernel_backend": _kernels.BACKEND,
        "generator": synthetic.GENERATOR_NAME,
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "stages": dict(cfg.stages),
        "n_documents": len(docs),
        "n_bonds": len(ds),
        "series_year_range": [series.start, series.end],
        "drop_report": ds.load_report.to_dict() if ds.load_report else None,
        "fits": {
            "olm": {
                "converged": olm_fit.converged,
                "iterations": olm_fit.iterations,
                "loglik": olm_fit.loglik,
                "n_floored": olm_fit.n_floored,
                "warnings": olm_fit.warnings,
            },
            **(
                {
                    "mnl": {
                        "converged": mnl_fit.converged,
                        "iterations": mnl_fit.iterations,
                        "loglik": mnl_fit.loglik,
                        "n_floored": mnl_fit.n_floored,
                        "warnings": mnl_fit.warnings,
                    }
                }
                if mnl_fit is not None
                else {}
            ),
            "heterogeneity": het_diag,
        },
    }

    bundle = ReportBundle(
        tables=tables,
        series=series,
        olm_fit=olm_fit,
        mnl_fit=mnl_fit,
        manifest=manifest,
        table_format=cfg.table_format,
    )
    manifest["artifacts"] = bundle.artifact_names()
    if write:
        bundle.write(cfg.resolved_output_dir())
    return bundle
