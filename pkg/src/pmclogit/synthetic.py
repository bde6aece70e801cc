"""Synthetic corpora and bond datasets from known parameters.

Every estimator in the package is validated by parameter recovery against
these generators. Randomness comes from Philox4x64, a named counter-based
generator with a published specification, keyed per stage by a sha256-derived
128-bit value of (label, seed): the raw counter streams are reproducible
across implementations, and numpy's distribution transforms sit on top.
Identical (dgp, seed) always yields identical output; per-row draws follow a
fixed order (years, provinces, covariate columns in declaration order, then
the response uniforms), which is the row-index-to-counter mapping any
parallel reimplementation must preserve.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .bond_data import BondDataset, BondRecord, decode_rating
from .errors import ConfigError
from .ordered_logit import logistic_cdf
from .pmc_index import GuaranteeSeries
from .policy_text import IndicatorScheme, PolicyDocument, Scorecard

GENERATOR_NAME = "philox4x64"

# Fitted main-table values used as the default simulation truth, paired with
# covariate laws moment-matched to the published sample moments.
FACSIMILE_BETA = (-3.781, -0.051, -0.150, 0.115, 0.096, -0.030, 0.586, 4.383)
FACSIMILE_CUTPOINTS = (-4.007, -2.379)
FACSIMILE_COVARIATES = ("im_guarantee", "amount", "term", "option", "ROA", "DTA", "AT", "GDP_growth")
FACSIMILE_MOMENTS = {
    "im_guarantee": (0.2919, 0.0476),
    "amount": (8.4809, 5.1610),
    "term": (5.7734, 1.9760),
    "option": (0.7453,),  # bernoulli
    "ROA": (1.5996, 1.1095),
    "DTA": (52.8133, 13.7823),
    "AT": (0.0713, 0.0639),
    "GDP_growth": (0.0802, 0.0335),
}

_NO_KEYWORDS_BODY = "。"  # lone ideographic full stop: non-empty, matches no rule


def philox_generator(seed: int, label: str) -> np.random.Generator:
    """Philox stream keyed by sha256(label:seed); the per-stage sub-seed rule."""
    digest = hashlib.sha256(f"{label}:{seed}".encode("utf-8")).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class CovariateLaw:
    """Marginal law of one covariate column.

    kinds: normal(a=mean, b=sd), uniform(a, b), bernoulli(a=p), and series
    (value is the scaled guarantee index of the row's issue year).
    """

    kind: str
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("normal", "bernoulli", "uniform", "series"):
            raise ConfigError(f"unknown covariate law {self.kind!r}")
        if self.kind == "normal" and self.b <= 0:
            raise ConfigError("normal law needs sd > 0")
        if self.kind == "bernoulli" and not 0.0 <= self.a <= 1.0:
            raise ConfigError("bernoulli law needs p in [0, 1]")
        if self.kind == "uniform" and self.a >= self.b:
            raise ConfigError("uniform law needs a < b")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "normal":
            return self.a + self.b * rng.standard_normal(n)
        if self.kind == "bernoulli":
            return (rng.random(n) < self.a).astype(np.float64)
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, n)
        raise ConfigError("series law values come from the guarantee series, not draws")


@dataclass(frozen=True)
class OlmDgp:
    """Ordered-model data generating process with known truth."""

    beta_true: tuple[float, ...]
    cutpoints_true: tuple[float, ...]
    covariate_laws: dict[str, CovariateLaw]
    n: int
    seed: int
    link: str = "logit"
    year_range: tuple[int, int] = (2015, 2023)
    provinces: tuple[str, ...] = ("Guangdong", "Jiangsu", "Zhejiang", "Sichuan", "Hunan", "Gansu")
    n_issuers: int = 500

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if len(self.beta_true) != len(self.covariate_laws):
            raise ConfigError("beta_true length must match the number of covariate laws")
        if np.any(np.diff(self.cutpoints_true) <= 0):
            raise ConfigError("cutpoints_true must be strictly increasing")
        if "option" in self.covariate_laws and self.covariate_laws["option"].kind != "bernoulli":
            raise ConfigError("the option column is binary; use a bernoulli law")

    @property
    def covariates(self) -> tuple[str, ...]:
        return tuple(self.covariate_laws)


def facsimile_dgp(n: int = 20000, seed: int = 0, *,
                  im_guarantee_from_series: bool = False) -> OlmDgp:
    """Desk-scale facsimile of the published estimation problem.

    Truth is the main-table fit; covariates are moment-matched to the
    published descriptive statistics. With ``im_guarantee_from_series`` the
    guarantee regressor comes from a yearly series instead of its own law,
    which exercises the series join end to end.
    """
    laws: dict[str, CovariateLaw] = {}
    for name in FACSIMILE_COVARIATES:
        m = FACSIMILE_MOMENTS[name]
        if name == "option":
            laws[name] = CovariateLaw("bernoulli", m[0])
        elif name == "im_guarantee" and im_guarantee_from_series:
            laws[name] = CovariateLaw("series")
        else:
            laws[name] = CovariateLaw("normal", m[0], m[1])
    return OlmDgp(
        beta_true=FACSIMILE_BETA,
        cutpoints_true=FACSIMILE_CUTPOINTS,
        covariate_laws=laws,
        n=n,
        seed=seed,
    )


def simulate_bonds(dgp: OlmDgp, series: GuaranteeSeries | None = None) -> BondDataset:
    """Draw a bond dataset from the DGP; the response follows the ordered model.

    Draw order per dataset: issue years, provinces, issuer ids, covariate
    columns in declaration order, then one uniform per row inverted through
    the category CDF.
    """
    rng = philox_generator(dgp.seed, "bonds")
    n = dgp.n
    y0, y1 = dgp.year_range
    years = rng.integers(y0, y1 + 1, n)
    provinces = rng.integers(0, len(dgp.provinces), n)
    issuers = rng.integers(0, dgp.n_issuers, n)

    columns: dict[str, np.ndarray] = {}
    for name, law in dgp.covariate_laws.items():
        if law.kind == "series":
            if series is None:
                raise ConfigError(f"covariate {name!r} uses the series law but no series was given")
            columns[name] = np.array([series.scaled_value(int(y)) for y in years])
        else:
            columns[name] = law.draw(rng, n)

    beta = np.asarray(dgp.beta_true, dtype=np.float64)
    cut = np.asarray(dgp.cutpoints_true, dtype=np.float64)
    X = np.column_stack([columns[name] for name in dgp.covariates])
    eta = X @ beta
    if dgp.link == "logit":
        cums = logistic_cdf(cut[None, :] - eta[:, None])
    else:
        from scipy.special import ndtr

        cums = ndtr(cut[None, :] - eta[:, None])
    u = rng.random(n)
    y = 1 + (u[:, None] > cums).sum(axis=1)

    records = []
    for i in range(n):
        fields = {name: float(columns[name][i]) for name in dgp.covariates}
        im = fields.pop("im_guarantee", None)
        records.append(
            BondRecord(
                bond_id=f"SIM-{i:06d}",
                issue_year=int(years[i]),
                rating_label=decode_rating(int(y[i])),
                amount=fields.get("amount", 0.0),
                term=fields.get("term", 1.0),
                option=int(fields.get("option", 0.0)),
                ROA=fields.get("ROA", 0.0),
                DTA=fields.get("DTA", 0.0),
                AT=fields.get("AT", 0.0),
                GDP_growth=fields.get("GDP_growth", 0.0),
                province=dgp.provinces[provinces[i]],
                issuer_id=f"ISS-{issuers[i]:04d}",
                im_guarantee=im,
            )
        )
    return BondDataset.from_records(records)


@dataclass(frozen=True)
class CorpusDgp:
    """Synthetic policy corpus: Bernoulli indicator draws per document.

    ``inclusion_by_year`` gives each indicator's inclusion probability for
    documents issued that year (one schedule shared by all indicators).
    """

    scheme: IndicatorScheme
    docs_per_year: int
    inclusion_by_year: dict[int, float]
    seed: int

    def __post_init__(self):
        if self.docs_per_year < 1:
            raise ConfigError("docs_per_year must be at least 1")
        for year, p in self.inclusion_by_year.items():
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"inclusion probability for {year} outside [0, 1]: {p}")


def linear_inclusion_schedule(year_range: tuple[int, int], p_start: float,
                              p_end: float) -> dict[int, float]:
    y0, y1 = year_range
    if y1 == y0:
        return {y0: p_start}
    return {
        y: p_start + (p_end - p_start) * (y - y0) / (y1 - y0)
        for y in range(y0, y1 + 1)
    }


def simulate_policies(dgp: CorpusDgp) -> list[tuple[PolicyDocument, Scorecard]]:
    """Emit synthetic documents whose bodies contain exactly the drawn keywords.

    Scoring the generated document with the scheme's dictionary tokenizer
    reproduces the drawn scorecard bit-exactly. This requires rule terms to
    be globally unique across indicators (the shipped scheme satisfies it);
    a document with no drawn indicator gets a neutral one-character body.
    """
    dgp.scheme.validate()
    seen: dict[str, str] = {}
    for sec in dgp.scheme.secondaries():
        for term in sec.rule.terms:
            if term in seen and seen[term] != sec.code:
                raise ConfigError(
                    f"rule term {term!r} appears in both {seen[term]} and {sec.code}; "
                    "round-trip generation needs globally unique terms"
                )
            seen[term] = sec.code

    rng = philox_generator(dgp.seed, "policies")
    secondaries = list(dgp.scheme.secondaries())
    out = []
    for year in sorted(dgp.inclusion_by_year):
        p = dgp.inclusion_by_year[year]
        for j in range(dgp.docs_per_year):
            draws = rng.random(len(secondaries)) < p
            values = {sec.code: int(draws[m]) for m, sec in enumerate(secondaries)}
            pieces = []
            for m, sec in enumerate(secondaries):
                if draws[m]:
                    if sec.rule.kind == "all_of":
                        pieces.extend(sec.rule.terms)
                    else:
                        pieces.append(sec.rule.terms[0])
            doc_id = f"SYN-{year}-{j:02d}"
            doc = PolicyDocument(
                id=doc_id,
                title=f"Synthetic policy {year} #{j}",
                issuing_body="synthetic",
                issue_year=year,
                body="\n".join(pieces) if pieces else _NO_KEYWORDS_BODY,
            )
            out.append((doc, Scorecard(document_id=doc_id, values=values)))
    return out
