"""Baseline-category multinomial logit, the robustness check for the ordered model.

Each non-baseline category c gets its own intercept and slope vector; the
linear predictor of the baseline category is fixed at zero and

    P(y = c | x) = exp(eta_c) / sum_d exp(eta_d),

computed with max-subtraction for overflow safety. Estimation follows the
same Newton-with-line-search contract as the ordered fit, including the
canonical row ordering and fixed-tree chunk reduction, so fits are
bit-reproducible under row permutations and across worker counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._design import design_matrix, response_codes
from .errors import ConvergenceError, DataError
from .ordered_logit import (
    CoefRow,
    FitOptions,
    OlmFit,
    OlmSpec,
    _map_chunks,
    _newton_maximize,
    _rank_check,
    inference_row,
    significance_stars,
)


@dataclass
class MnlParams:
    """Per-category coefficients keyed by non-baseline category code.

    Each entry is (intercept, beta vector); the baseline category's linear
    predictor is identically zero.
    """

    baseline: int
    per_category: dict[int, tuple[float, np.ndarray]]

    def __post_init__(self):
        self.per_category = {
            int(c): (float(b0), np.atleast_1d(np.asarray(b, dtype=np.float64)))
            for c, (b0, b) in self.per_category.items()
        }
        if self.baseline in self.per_category:
            raise ValueError(f"baseline category {self.baseline} must not carry coefficients")
        ks = {len(b) for _, b in self.per_category.values()}
        if len(ks) > 1:
            raise ValueError("per-category beta vectors have mismatched lengths")

    @property
    def n_categories(self) -> int:
        return len(self.per_category) + 1

    @property
    def categories(self) -> list[int]:
        """Non-baseline category codes, ascending (the flat block order)."""
        return sorted(self.per_category)

    def coef_matrix(self) -> np.ndarray:
        """(C-1, k+1) rows of (intercept, beta) in ascending category order."""
        return np.ascontiguousarray(
            [np.concatenate([[b0], b]) for b0, b in
             (self.per_category[c] for c in self.categories)]
        )

    @classmethod
    def from_coef_matrix(cls, coef: np.ndarray, baseline: int, n_categories: int) -> "MnlParams":
        cats = [c for c in range(1, n_categories + 1) if c != baseline]
        return cls(
            baseline=baseline,
            per_category={c: (float(coef[j, 0]), coef[j, 1:].copy()) for j, c in enumerate(cats)},
        )


@dataclass(frozen=True)
class MnlFit:
    """Fitted multinomial model; vcov covers the flat (C-1)(k+1) parameters.

    Immutable after construction, like OlmFit.
    """

    params: MnlParams
    loglik: float
    loglik_null: float
    vcov: np.ndarray
    n_obs: int
    converged: bool
    iterations: int
    spec: OlmSpec
    param_names: list[str]
    category_counts: list[int]
    n_floored: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model": "multinomial_logit",
            "response": self.spec.response,
            "covariates": list(self.spec.covariates),
            "n_categories": self.spec.n_categories,
            "baseline": self.params.baseline,
            "per_category": {
                str(c): [b0, list(map(float, b))]
                for c, (b0, b) in self.params.per_category.items()
            },
            "loglik": self.loglik,
            "loglik_null": self.loglik_null,
            "vcov": self.vcov.tolist(),
            "n_obs": self.n_obs,
            "converged": self.converged,
            "iterations": self.iterations,
            "param_names": list(self.param_names),
            "category_counts": list(self.category_counts),
            "n_floored": self.n_floored,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MnlFit":
        if payload.get("model") != "multinomial_logit":
            raise ValueError(f"not a multinomial_logit payload: {payload.get('model')!r}")
        spec = OlmSpec(
            response=payload["response"],
            covariates=tuple(payload["covariates"]),
            n_categories=payload["n_categories"],
        )
        params = MnlParams(
            baseline=payload["baseline"],
            per_category={
                int(c): (b0, np.array(b)) for c, (b0, b) in payload["per_category"].items()
            },
        )
        return cls(
            params=params,
            loglik=payload["loglik"],
            loglik_null=payload["loglik_null"],
            vcov=np.array(payload["vcov"]),
            n_obs=payload["n_obs"],
            converged=payload["converged"],
            iterations=payload["iterations"],
            spec=spec,
            param_names=list(payload["param_names"]),
            category_counts=list(payload["category_counts"]),
            n_floored=payload.get("n_floored", 0),
            warnings=list(payload.get("warnings", [])),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MnlFit":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def mnl_probs(x, params: MnlParams) -> np.ndarray:
    """Probability vector over all C categories for one covariate vector."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    C = params.n_categories
    eta = np.zeros(C)
    for c in params.categories:
        b0, b = params.per_category[c]
        if x.shape != b.shape:
            raise ValueError(f"covariate vector has length {x.shape[0]}, expected {b.shape[0]}")
        eta[c - 1] = b0 + float(x @ b)
    m = eta.max()
    e = np.exp(eta - m)
    return e / e.sum()


def _extract(data, spec: OlmSpec):
    y = response_codes(data, spec.response, spec.n_categories)
    X = design_matrix(data, spec.covariates, len(y))
    return y, X


def log_likelihood(data, spec: OlmSpec, params: MnlParams, *, with_diagnostics=False):
    """Exactly-rounded sum of per-row log-probabilities (floored, never -inf)."""
    y, X = _extract(data, spec)
    terms, n_floored = _kernels.mnl_terms(
        X, y, params.coef_matrix(), params.baseline, spec.n_categories
    )
    value = math.fsum(terms)
    return (value, n_floored) if with_diagnostics else value


def gradient(data, spec: OlmSpec, params: MnlParams) -> np.ndarray:
    """Analytic gradient over the flat (C-1)(k+1) parameter vector."""
    y, X = _extract(data, spec)
    rows = _kernels.mnl_score_rows(
        X, y, params.coef_matrix(), params.baseline, spec.n_categories
    )
    return np.array([math.fsum(rows[:, j]) for j in range(rows.shape[1])])


def mnl_fit(data, spec: OlmSpec, baseline: int = 2,
            options: FitOptions | None = None) -> MnlFit:
    """Maximum-likelihood fit of the baseline-category model.

    Starts at the intercepts-only closed form (log odds of empirical counts
    against the baseline), which is also where the null log-likelihood is
    evaluated.
    """
    options = options or FitOptions()
    if options.cluster is not None:
        raise ValueError("cluster-robust errors are implemented for the ordered fit only")
    y, X = _extract(data, spec)
    n, k = X.shape
    C = spec.n_categories
    if not 1 <= baseline <= C:
        raise ValueError(f"baseline must be one of 1..{C}, got {baseline}")

    counts = np.bincount(y, minlength=C + 1)[1:]
    if np.any(counts == 0):
        missing = [str(c + 1) for c in range(C) if counts[c] == 0]
        raise DataError(
            "every category 1..C must be observed at least once; "
            f"missing categories: {', '.join(missing)}"
        )

    order = np.lexsort(tuple(reversed([y] + [X[:, j] for j in range(k)])))
    y = np.ascontiguousarray(y[order])
    X = np.ascontiguousarray(X[order])

    if k:
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        const = [spec.covariates[j] for j in range(k) if sd[j] == 0.0]
        if const:
            from .errors import CollinearityError

            raise CollinearityError(const)
        Xs = np.ascontiguousarray((X - mean) / sd)
        _rank_check(Xs, spec.covariates)
    else:
        mean = sd = np.zeros(0)
        Xs = X

    cats = [c for c in range(1, C + 1) if c != baseline]
    kp1 = k + 1
    n_par = (C - 1) * kp1

    def evaluate(theta):
        coef = np.ascontiguousarray(theta.reshape(C - 1, kp1))
        return _map_chunks(
            lambda s, e: _kernels.mnl_chunk(Xs[s:e], y[s:e], coef, baseline, C),
            n,
            options.n_workers,
        )

    theta0 = np.zeros(n_par)
    for j, c in enumerate(cats):
        theta0[j * kp1] = math.log(counts[c - 1] / counts[baseline - 1])
    loglik_null = evaluate(theta0)[0]

    theta, ll, g, H, n_floored, converged, iterations = _newton_maximize(
        evaluate, theta0, options
    )

    coef_std = theta.reshape(C - 1, kp1)
    vcov_std = np.linalg.inv(-H)

    if k:
        # eta_c = b0 + b.(x - m)/s  =>  original intercept b0 - b.(m/s), slope b/s
        T = np.zeros((n_par, n_par))
        coef = np.empty_like(coef_std)
        for j in range(C - 1):
            base = j * kp1
            T[base, base] = 1.0
            T[base, base + 1 : base + kp1] = -mean / sd
            T[base + 1 : base + kp1, base + 1 : base + kp1] = np.diag(1.0 / sd)
            coef[j, 0] = coef_std[j, 0] - float(coef_std[j, 1:] @ (mean / sd))
            coef[j, 1:] = coef_std[j, 1:] / sd
        vcov = T @ vcov_std @ T.T
    else:
        coef = coef_std
        vcov = vcov_std
    vcov = (vcov + vcov.T) / 2.0

    warnings_out = []
    if k and np.any(np.abs(coef_std[:, 1:]) > 30.0):
        warnings_out.append(
            "possible quasi-separation: a standardized coefficient exceeds 30 in magnitude"
        )

    param_names = []
    for c in cats:
        param_names.append(f"const[{c}]")
        param_names.extend(f"{name}[{c}]" for name in spec.covariates)

    return MnlFit(
        params=MnlParams.from_coef_matrix(coef, baseline, C),
        loglik=ll,
        loglik_null=loglik_null,
        vcov=vcov,
        n_obs=n,
        converged=converged,
        iterations=iterations,
        spec=spec,
        param_names=param_names,
        category_counts=counts.tolist(),
        n_floored=n_floored,
        warnings=warnings_out,
    )


def summarize(fit_result: MnlFit) -> dict[int, list[CoefRow]]:
    """Per-category blocks of inference rows: {category: [const, covariates...]}."""
    if not fit_result.converged:
        raise ConvergenceError("refusing to summarize a non-converged fit")
    se = np.sqrt(np.diag(fit_result.vcov))
    k = len(fit_result.spec.covariates)
    blocks: dict[int, list[CoefRow]] = {}
    for j, c in enumerate(fit_result.params.categories):
        b0, b = fit_result.params.per_category[c]
        base = j * (k + 1)
        rows = [inference_row("Constant", b0, float(se[base]))]
        rows.extend(
            inference_row(name, float(b[m]), float(se[base + 1 + m]))
            for m, name in enumerate(fit_result.spec.covariates)
        )
        blocks[c] = rows
    return blocks


_TIER_ORDER = {"": 0, "*": 1, "**": 2, "***": 3}


@dataclass
class ComparisonRow:
    """One covariate compared across the two model families.

    ``sign_flip`` is orientation-adjusted: a positive ordered-model slope
    pushes mass toward higher codes, so the structurally consistent MNL sign
    is the ordered sign for blocks above the baseline and its opposite for
    blocks below it (the headline guarantee regressor is negative under the
    ordered fit yet positive in block 1; that is agreement, not a flip).
    Deviations are flagged only when both sides clear |t| >= 1.
    """

    name: str
    olm_coefficient: float
    olm_t: float
    olm_stars: str
    blocks: dict[int, tuple[float, float, str]]  # category -> (coef, t, stars)
    significance_change: dict[int, str]  # category -> decreased|increased|unchanged
    sign_flip: dict[int, bool]


@dataclass
class ModelComparison:
    """Descriptive OLM-vs-MNL deltas; no model-selection verdict is implied.

    The models are non-nested, so no likelihood-ratio comparison is made;
    sign disagreements are expected structurally (a positive MNL block-1
    coefficient and a negative OLM slope both favor the best rating) and are
    reported, not judged.
    """

    pseudo_r2_olm: float
    pseudo_r2_mnl: float
    baseline: int
    rows: list[ComparisonRow]
    n_obs: int


def compare(olm: OlmFit, mnl: MnlFit) -> ModelComparison:
    """Side-by-side pseudo R-squared, significance tiers, and sign agreement."""
    if olm.n_obs != mnl.n_obs or list(olm.category_counts) != list(mnl.category_counts):
        raise DataError("row mismatch: fits were not estimated on identical observations")
    if tuple(olm.spec.covariates) != tuple(mnl.spec.covariates):
        raise DataError("covariate mismatch between the two fits")
    olm_rows = {r.name: r for r in _olm_cov_rows(olm)}
    blocks = summarize(mnl)
    rows = []
    for name in olm.spec.covariates:
        o = olm_rows[name]
        per_block: dict[int, tuple[float, float, str]] = {}
        sig_change: dict[int, str] = {}
        flips: dict[int, bool] = {}
        for c, block in blocks.items():
            m = next(r for r in block if r.name == name)
            per_block[c] = (m.coefficient, m.t_value, m.stars or "")
            d = _TIER_ORDER[m.stars or ""] - _TIER_ORDER[o.stars or ""]
            sig_change[c] = "decreased" if d < 0 else ("increased" if d > 0 else "unchanged")
            consistent_sign = np.sign(o.coefficient) * np.sign(c - mnl.params.baseline)
            flips[c] = bool(
                abs(o.t_value) >= 1.0
                and abs(m.t_value) >= 1.0
                and np.sign(m.coefficient) != consistent_sign
            )
        rows.append(
            ComparisonRow(
                name=name,
                olm_coefficient=o.coefficient,
                olm_t=o.t_value,
                olm_stars=o.stars or "",
                blocks=per_block,
                significance_change=sig_change,
                sign_flip=flips,
            )
        )
    return ModelComparison(
        pseudo_r2_olm=1.0 - olm.loglik / olm.loglik_null,
        pseudo_r2_mnl=1.0 - mnl.loglik / mnl.loglik_null,
        baseline=mnl.params.baseline,
        rows=rows,
        n_obs=olm.n_obs,
    )


def _olm_cov_rows(olm: OlmFit) -> list[CoefRow]:
    se = np.sqrt(np.diag(olm.vcov))
    return [
        inference_row(name, float(olm.params.beta[j]), float(se[j]))
        for j, name in enumerate(olm.spec.covariates)
    ]
