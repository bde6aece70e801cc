"""Cumulative (parallel-lines) ordered logit estimated by maximum likelihood.

Model: the latent outcome is x'beta + eps with unit-scale error, observed as
code c when the latent value falls between adjacent cutpoints a_{c-1} < a_c.
Cumulative probabilities satisfy

    link(P(y <= c | x)) = a_c - x'beta,

so a positive coefficient pushes probability mass toward higher numeric codes
(here: numerically worse ratings). The logit link is the primary model; the
probit link is available as an option.

Estimation is Newton's method with backtracking line search in an
unconstrained parameterization (a_1 and log-gaps between consecutive
cutpoints), which keeps the cutpoints ordered without constrained
optimization. Covariates are standardized internally for conditioning and
everything is reported back on the original scale; the covariance matrix is
the inverse observed information mapped through the reparameterization and
standardization Jacobians.

Reproducibility contracts:
  * ``fit`` canonicalizes row order internally, so permuting input rows
    yields a bit-identical fit.
  * Likelihood evaluations reduce fixed row chunks through a fixed pairwise
    tree, so results are bit-identical for any worker count.
  * The public ``log_likelihood`` and ``gradient`` reduce per-row terms with
    exactly-rounded summation; duplicating every row doubles them exactly.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, ndtr, ndtri

from . import _kernels
from ._design import design_matrix, get_column, response_codes
from .errors import CollinearityError, ConvergenceError, DataError

CRIT95 = 1.959964  # two-sided 95% normal critical value used for all CIs

_LINK_CODES = {"logit": _kernels.LINK_LOGIT, "probit": _kernels.LINK_PROBIT}

_CHUNK_ROWS = 8192
_SEPARATION_BOUND = 30.0  # |standardized coefficient| beyond this smells of separation


def logistic_cdf(z):
    """Numerically stable logistic CDF; accepts scalars or arrays."""
    arr = np.asarray(z, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ez = np.exp(arr[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out) if np.isscalar(z) or arr.ndim == 0 else out


def significance_stars(p_value: float) -> str:
    """*** p<0.01, ** p<0.05, * p<0.1, empty otherwise."""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


def normal_p_value(t: float) -> float:
    """Two-sided p-value from the standard normal reference."""
    return float(erfc(abs(t) / math.sqrt(2.0)))


@dataclass(frozen=True)
class OlmSpec:
    """Model specification: response column, covariate order, categories, link."""

    response: str
    covariates: tuple[str, ...]
    n_categories: int = 3
    link: str = "logit"

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if self.n_categories < 2:
            raise ValueError("n_categories must be at least 2")
        if len(set(self.covariates)) != len(self.covariates):
            raise ValueError("covariate names must be unique")
        if self.link not in _LINK_CODES:
            raise ValueError(f"link must be one of {sorted(_LINK_CODES)}")


@dataclass
class OlmParams:
    """Natural parameters: slope vector and strictly increasing cutpoints.

    The latent error scale is fixed at 1 (it is not identified separately
    from beta).
    """

    beta: np.ndarray
    cutpoints: np.ndarray

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64))
        self.cutpoints = np.atleast_1d(np.asarray(self.cutpoints, dtype=np.float64))
        if len(self.cutpoints) < 1:
            raise ValueError("at least one cutpoint is required")
        if np.any(np.diff(self.cutpoints) <= 0):
            raise ValueError(f"cutpoints must be strictly increasing, got {self.cutpoints}")

    @property
    def n_categories(self) -> int:
        return len(self.cutpoints) + 1


@dataclass
class FitOptions:
    """Optimizer and inference settings shared by the estimators."""

    max_iter: int = 200
    gradient_tol: float = 1e-8
    loglik_rel_tol: float = 1e-12
    n_workers: int = 1
    cluster: str | None = None


@dataclass
class CoefRow:
    """One summary row: estimate, classical inference, 95% CI, stars.

    ``stars`` is None for cutpoint rows (reported without significance
    marks).
    """

    name: str
    coefficient: float
    std_error: float
    t_value: float
    p_value: float
    ci_low: float
    ci_high: float
    stars: str | None


@dataclass(frozen=True)
class OlmFit:
    """Fitted ordered model: parameters, covariance, and diagnostics.

    Treated as immutable after construction (safe to share across threads);
    derive variants with dataclasses.replace.
    """

    params: OlmParams
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
    vcov_kind: str = "observed_information"
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model": "ordered_logit",
            "link": self.spec.link,
            "response": self.spec.response,
            "covariates": list(self.spec.covariates),
            "n_categories": self.spec.n_categories,
            "beta": self.params.beta.tolist(),
            "cutpoints": self.params.cutpoints.tolist(),
            "loglik": self.loglik,
            "loglik_null": self.loglik_null,
            "vcov": self.vcov.tolist(),
            "vcov_kind": self.vcov_kind,
            "n_obs": self.n_obs,
            "converged": self.converged,
            "iterations": self.iterations,
            "param_names": list(self.param_names),
            "category_counts": list(self.category_counts),
            "n_floored": self.n_floored,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "OlmFit":
        if payload.get("model") != "ordered_logit":
            raise ValueError(f"not an ordered_logit payload: {payload.get('model')!r}")
        spec = OlmSpec(
            response=payload["response"],
            covariates=tuple(payload["covariates"]),
            n_categories=payload["n_categories"],
            link=payload["link"],
        )
        return cls(
            params=OlmParams(np.array(payload["beta"]), np.array(payload["cutpoints"])),
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
            vcov_kind=payload.get("vcov_kind", "observed_information"),
            warnings=list(payload.get("warnings", [])),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "OlmFit":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def category_probs(x, params: OlmParams, link: str = "logit") -> np.ndarray:
    """Probability vector over the C categories for one covariate vector."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != params.beta.shape:
        raise ValueError(
            f"covariate vector has length {x.shape[0]}, expected {params.beta.shape[0]}"
        )
    eta = float(x @ params.beta)
    z = params.cutpoints - eta
    if link == "logit":
        cums = logistic_cdf(z)
    elif link == "probit":
        cums = ndtr(z)
    else:
        raise ValueError(f"unknown link {link!r}")
    cums = np.concatenate(([0.0], cums, [1.0]))
    return np.diff(cums)


def _extract(data, spec: OlmSpec):
    y = response_codes(data, spec.response, spec.n_categories)
    X = design_matrix(data, spec.covariates, len(y))
    return y, X


def log_likelihood(data, spec: OlmSpec, params: OlmParams, *, with_diagnostics=False):
    """Sum of per-observation log-probabilities.

    Probabilities are floored at the smallest positive normal double before
    logging, so the value is never -inf; ``with_diagnostics=True`` also
    returns the number of floored observations. The reduction is exactly
    rounded (math.fsum), hence order-invariant.
    """
    y, X = _extract(data, spec)
    link = _LINK_CODES[spec.link]
    terms, n_floored = _kernels.ologit_terms(X, y, params.beta, params.cutpoints, link)
    value = math.fsum(terms)
    return (value, n_floored) if with_diagnostics else value


def _natural_to_unconstrained(params: OlmParams) -> np.ndarray:
    gaps = np.diff(params.cutpoints)
    return np.concatenate([params.beta, [params.cutpoints[0]], np.log(gaps)])


def _unconstrained_to_natural(theta: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    beta = theta[:k]
    cut = theta[k] + np.concatenate([[0.0], np.cumsum(np.exp(theta[k + 1 :]))])
    return beta, cut


def _cut_jacobian(theta: np.ndarray, k: int) -> np.ndarray:
    """d(natural cutpoints)/d(a_1, log-gaps); lower triangular of exp gaps."""
    n_cut = len(theta) - k
    J = np.zeros((n_cut, n_cut))
    J[:, 0] = 1.0
    egaps = np.exp(theta[k + 1 :])
    for j in range(1, n_cut):
        J[j:, j] = egaps[j - 1]
    return J


def gradient(data, spec: OlmSpec, params: OlmParams) -> np.ndarray:
    """Exact analytic gradient of ``log_likelihood``.

    Reported in the unconstrained parameterization used by the optimizer:
    (beta, a_1, log gap_2, ..., log gap_{C-1}). Per-row contributions are
    reduced with exactly-rounded summation.
    """
    y, X = _extract(data, spec)
    link = _LINK_CODES[spec.link]
    rows = _kernels.ologit_score_rows(X, y, params.beta, params.cutpoints, link)
    g_nat = np.array([math.fsum(rows[:, j]) for j in range(rows.shape[1])])
    k = len(params.beta)
    theta = _natural_to_unconstrained(params)
    J = _cut_jacobian(theta, k)
    return np.concatenate([g_nat[:k], J.T @ g_nat[k:]])


def _chunk_slices(n: int) -> list[tuple[int, int]]:
    return [(s, min(s + _CHUNK_ROWS, n)) for s in range(0, n, _CHUNK_ROWS)]


def _reduce_parts(parts):
    """Fixed pairwise tree over chunk results; order never depends on workers."""
    items = list(parts)
    while len(items) > 1:
        nxt = []
        for i in range(0, len(items) - 1, 2):
            a, b = items[i], items[i + 1]
            nxt.append(tuple(ai + bi for ai, bi in zip(a, b)))
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def _map_chunks(eval_one, n: int, n_workers: int):
    slices = _chunk_slices(n)
    if n_workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(lambda se: eval_one(*se), slices))
    else:
        parts = [eval_one(*se) for se in slices]
    return _reduce_parts(parts)


def _rank_check(X: np.ndarray, names) -> None:
    """Raise CollinearityError naming dependent columns when X is rank deficient."""
    n, k = X.shape
    if k == 0:
        return
    rank = np.linalg.matrix_rank(X)
    if rank >= k:
        return
    from scipy.linalg import qr

    _, _, piv = qr(X, mode="economic", pivoting=True)
    dependent = sorted(names[j] for j in piv[rank:])
    raise CollinearityError(dependent)


def _newton_maximize(evaluate, theta0: np.ndarray, options: FitOptions):
    """Newton ascent with Armijo backtracking; gradient-step fallback.

    ``evaluate`` returns (loglik, grad, hess, n_floored) at a parameter
    vector. Convergence: gradient max-norm below gradient_tol, or relative
    log-likelihood change below loglik_rel_tol.
    """
    theta = theta0.copy()
    ll, g, H, n_floored = evaluate(theta)
    converged = False
    iterations = 0
    for _ in range(options.max_iter):
        if np.max(np.abs(g)) < options.gradient_tol:
            converged = True
            break
        step = None
        try:
            c = np.linalg.cholesky(-H)
            step = np.linalg.solve(c.T, np.linalg.solve(c, g))
        except np.linalg.LinAlgError:
            step = None
        if step is None or g @ step <= 0:
            # Hessian not negative definite here: plain gradient ascent step
            step = g / max(1.0, np.max(np.abs(g)))
        slope = g @ step
        alpha = 1.0
        accepted = False
        for _ in range(60):
            cand = theta + alpha * step
            ll_new, g_new, H_new, nf_new = evaluate(cand)
            if np.isfinite(ll_new) and ll_new >= ll + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        iterations += 1
        if not accepted:
            break
        rel_change = abs(ll_new - ll) / (1.0 + abs(ll_new))
        theta, ll, g, H, n_floored = cand, ll_new, g_new, H_new, nf_new
        if rel_change < options.loglik_rel_tol:
            converged = True
            break
        if np.max(np.abs(g)) < options.gradient_tol:
            converged = True
            break
    return theta, ll, g, H, n_floored, converged, iterations


def _start_cutpoints(counts: np.ndarray, link: str) -> np.ndarray:
    cumfreq = np.cumsum(counts)[:-1] / counts.sum()
    if link == "logit":
        return np.log(cumfreq / (1.0 - cumfreq))
    return ndtri(cumfreq)


def fit(data, spec: OlmSpec, options: FitOptions | None = None) -> OlmFit:
    """Maximum-likelihood fit of the ordered model.

    Requires every category 1..C observed and a full-rank covariate matrix
    after standardization. Non-convergence within max_iter is flagged on the
    result, not raised. A quasi-separation warning is attached when any
    standardized coefficient exceeds 30 in magnitude.
    """
    options = options or FitOptions()
    y, X = _extract(data, spec)
    n, k = X.shape
    C = spec.n_categories

    counts = np.bincount(y, minlength=C + 1)[1:]
    if np.any(counts == 0):
        missing = [str(c + 1) for c in range(C) if counts[c] == 0]
        raise DataError(
            "every category 1..C must be observed at least once; "
            f"missing categories: {', '.join(missing)}"
        )

    cluster_raw = None
    if options.cluster is not None:
        cluster_raw = get_column(data, options.cluster)
        if len(cluster_raw) != n:
            raise DataError(f"cluster column {options.cluster!r} length mismatch")

    # canonical row order: fits are bit-identical under input permutations
    sort_cols = [y] + [X[:, j] for j in range(k)]
    if cluster_raw is not None:
        _, cluster_codes = np.unique(cluster_raw, return_inverse=True)
        sort_cols.append(cluster_codes)
    order = np.lexsort(tuple(reversed(sort_cols)))
    y = np.ascontiguousarray(y[order])
    X = np.ascontiguousarray(X[order])
    if cluster_raw is not None:
        cluster_codes = np.ascontiguousarray(cluster_codes[order])

    # standardize for optimizer conditioning; constant columns are degenerate
    if k:
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        const = [spec.covariates[j] for j in range(k) if sd[j] == 0.0]
        if const:
            raise CollinearityError(const)
        Xs = np.ascontiguousarray((X - mean) / sd)
        _rank_check(Xs, spec.covariates)
    else:
        mean = sd = np.zeros(0)
        Xs = X

    link_code = _LINK_CODES[spec.link]
    n_cut = C - 1

    def evaluate(theta):
        beta_s, cut_s = _unconstrained_to_natural(theta, k)
        if np.any(np.diff(cut_s) <= 0):  # exp underflow collapsed a gap
            return -np.inf, np.zeros(k + n_cut), np.zeros((k + n_cut, k + n_cut)), 0
        cut_s = np.ascontiguousarray(cut_s)
        beta_c = np.ascontiguousarray(beta_s)
        ll, g_nat, H_nat, nfl = _map_chunks(
            lambda s, e: _kernels.ologit_chunk(Xs[s:e], y[s:e], beta_c, cut_s, link_code),
            n,
            options.n_workers,
        )
        J = _cut_jacobian(theta, k)
        g = np.concatenate([g_nat[:k], J.T @ g_nat[k:]])
        Jf = np.zeros((k + n_cut, k + n_cut))
        Jf[:k, :k] = np.eye(k)
        Jf[k:, k:] = J
        H = Jf.T @ H_nat @ Jf
        # curvature of the log-gap map: d2 a_c / d delta_j^2 = exp(delta_j), c >= j
        egaps = np.exp(theta[k + 1 :])
        for j in range(1, n_cut):
            H[k + j, k + j] += egaps[j - 1] * g_nat[k + j :].sum()
        return ll, g, H, nfl

    start_cut = _start_cutpoints(counts, spec.link)
    theta0 = np.concatenate([np.zeros(k), [start_cut[0]], np.log(np.diff(start_cut))])

    # The start point is the intercepts-only MLE (beta = 0, cutpoints at the
    # link-inverse of the cumulative frequencies), so its value is the null
    # log-likelihood, evaluated through the same reduction as loglik. Armijo
    # acceptance never decreases the objective, hence loglik >= loglik_null
    # holds exactly.
    loglik_null = evaluate(theta0)[0]

    theta, ll, g, H_unc, n_floored, converged, iterations = _newton_maximize(
        evaluate, theta0, options
    )

    beta_s, cut_s = _unconstrained_to_natural(theta, k)

    warnings_out = []
    if k and np.any(np.abs(beta_s) > _SEPARATION_BOUND):
        bad = [spec.covariates[j] for j in range(k) if abs(beta_s[j]) > _SEPARATION_BOUND]
        warnings_out.append(
            "possible quasi-separation: standardized coefficient magnitude exceeds "
            f"{_SEPARATION_BOUND:g} for {', '.join(bad)}"
        )

    # vcov: inverse observed information in the unconstrained space, mapped
    # through the reparameterization Jacobian, then through standardization.
    J = _cut_jacobian(theta, k)
    Jf = np.zeros((k + n_cut, k + n_cut))
    Jf[:k, :k] = np.eye(k)
    Jf[k:, k:] = J
    vcov_unc = np.linalg.inv(-H_unc)
    vcov_std = Jf @ vcov_unc @ Jf.T

    if k:
        T = np.zeros((k + n_cut, k + n_cut))
        T[:k, :k] = np.diag(1.0 / sd)
        T[k:, :k] = np.tile(mean / sd, (n_cut, 1))
        T[k:, k:] = np.eye(n_cut)
        beta_orig = beta_s / sd
        cut_orig = cut_s + float(beta_s @ (mean / sd))
        vcov = T @ vcov_std @ T.T
    else:
        beta_orig = beta_s
        cut_orig = cut_s
        vcov = vcov_std
    vcov = (vcov + vcov.T) / 2.0

    params = OlmParams(beta_orig, cut_orig)
    vcov_kind = "observed_information"
    if options.cluster is not None:
        rows = _kernels.ologit_score_rows(
            X, y, params.beta, np.ascontiguousarray(params.cutpoints), link_code
        )
        n_groups = int(cluster_codes.max()) + 1
        group_scores = np.zeros((n_groups, k + n_cut))
        np.add.at(group_scores, cluster_codes, rows)
        meat = group_scores.T @ group_scores
        vcov = vcov @ meat @ vcov
        vcov = (vcov + vcov.T) / 2.0
        vcov_kind = f"cluster_robust[{options.cluster}]"

    return OlmFit(
        params=params,
        loglik=ll,
        loglik_null=loglik_null,
        vcov=vcov,
        n_obs=n,
        converged=converged,
        iterations=iterations,
        spec=spec,
        param_names=list(spec.covariates) + [f"cut{c}" for c in range(1, C)],
        category_counts=counts.tolist(),
        n_floored=n_floored,
        vcov_kind=vcov_kind,
        warnings=warnings_out,
    )


def inference_row(name: str, coefficient: float, std_error: float, *, cutpoint=False) -> CoefRow:
    """Classical normal-reference inference for one estimate."""
    t = coefficient / std_error
    p = normal_p_value(t)
    half = CRIT95 * std_error
    return CoefRow(
        name=name,
        coefficient=coefficient,
        std_error=std_error,
        t_value=t,
        p_value=p,
        ci_low=coefficient - half,
        ci_high=coefficient + half,
        stars=None if cutpoint else significance_stars(p),
    )


def summarize(fit_result: OlmFit, spec: OlmSpec | None = None) -> list[CoefRow]:
    """Coefficient rows followed by cutpoint rows (cutpoints carry no stars)."""
    if not fit_result.converged:
        raise ConvergenceError(
            "refusing to summarize a non-converged fit "
            f"(iterations={fit_result.iterations}); inspect warnings or raise max_iter"
        )
    spec = spec or fit_result.spec
    se = np.sqrt(np.diag(fit_result.vcov))
    k = len(spec.covariates)
    rows = [
        inference_row(name, float(fit_result.params.beta[j]), float(se[j]))
        for j, name in enumerate(spec.covariates)
    ]
    for c, cut in enumerate(fit_result.params.cutpoints):
        rows.append(inference_row(f"cut{c + 1}", float(cut), float(se[k + c]), cutpoint=True))
    return rows


def pseudo_r2(fit_result: OlmFit) -> float:
    """McFadden measure 1 - loglik / loglik_null."""
    if fit_result.loglik_null == 0.0:
        raise DataError("pseudo R^2 undefined: null log-likelihood is zero (single-category data)")
    return 1.0 - fit_result.loglik / fit_result.loglik_null


def predict(fit_result: OlmFit, x) -> tuple[np.ndarray, int]:
    """(probability vector, modal category); ties break toward the lower code."""
    if not fit_result.converged:
        raise ConvergenceError("refusing to predict from a non-converged fit")
    probs = category_probs(x, fit_result.params, link=fit_result.spec.link)
    return probs, int(np.argmax(probs)) + 1
