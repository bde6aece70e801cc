"""Pure-numpy likelihood kernels (fallback backend).

Same contracts as the compiled extension in ``_likelihood.pyx``: every
function evaluates per-row quantities for one chunk of observations and
either returns them row-wise (``*_terms``, ``*_score_rows``) or reduced
over the chunk (``*_chunk``).

Conventions shared by both backends:
  * ``X`` is (n, k) float64, ``y`` holds 1-based category codes 1..C.
  * Ordered-model parameters are natural: ``beta`` (k,) and strictly
    increasing ``cut`` (C-1,); the latent scale is fixed at 1.
  * MNL coefficients are (C-1, k+1) rows of (intercept, beta) for the
    non-baseline categories in ascending code order.
  * Probabilities are floored at the smallest positive normal double
    before logging or dividing; floored rows are counted and reported.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

LINK_LOGIT = 0
LINK_PROBIT = 1

TINY = float(np.finfo(np.float64).tiny)

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


def logistic_cdf(z):
    """Numerically stable logistic CDF, elementwise."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _cdf_pdf_dpdf(z, link):
    """(F(z), f(z), f'(z)) with the infinite-bound convention F(+-inf)=1/0, f=f'=0."""
    z = np.asarray(z, dtype=np.float64)
    finite = np.isfinite(z)
    zf = np.where(finite, z, 0.0)
    if link == LINK_LOGIT:
        F = logistic_cdf(zf)
        f = F * (1.0 - F)
        fp = f * (1.0 - 2.0 * F)
    elif link == LINK_PROBIT:
        F = ndtr(zf)
        f = np.exp(-0.5 * zf * zf) / _SQRT_2PI
        fp = -zf * f
    else:
        raise ValueError(f"unknown link code {link}")
    F = np.where(finite, F, np.where(z > 0, 1.0, 0.0))
    f = np.where(finite, f, 0.0)
    fp = np.where(finite, fp, 0.0)
    return F, f, fp


def _ologit_parts(X, y, beta, cut, link):
    eta = X @ beta if X.shape[1] else np.zeros(len(y))
    acut = np.concatenate(([-np.inf], cut, [np.inf]))
    z_hi = acut[y] - eta
    z_lo = acut[y - 1] - eta
    Fhi, fhi, fphi = _cdf_pdf_dpdf(z_hi, link)
    Flo, flo, fplo = _cdf_pdf_dpdf(z_lo, link)
    # upper-tail brackets: F(hi)-F(lo) cancels badly, use the survival form
    Fc_hi, _, _ = _cdf_pdf_dpdf(-z_hi, link)
    Fc_lo, _, _ = _cdf_pdf_dpdf(-z_lo, link)
    upper = (z_hi + z_lo) > 0  # at most one bound is infinite, no nan
    p = np.where(upper, Fc_lo - Fc_hi, Fhi - Flo)
    n_floored = int(np.count_nonzero(p < TINY))
    p = np.maximum(p, TINY)
    return p, n_floored, fhi, flo, fphi, fplo


def ologit_terms(X, y, beta, cut, link):
    """Per-row log-probabilities. Returns (terms (n,), n_floored)."""
    p, n_floored, *_ = _ologit_parts(X, y, beta, cut, link)
    return np.log(p), n_floored


def ologit_score_rows(X, y, beta, cut, link):
    """Per-row gradient contributions, natural parameters. (n, k + C - 1)."""
    n, k = X.shape
    n_cut = len(cut)
    p, _, fhi, flo, _, _ = _ologit_parts(X, y, beta, cut, link)
    rows = np.zeros((n, k + n_cut))
    g_eta = -(fhi - flo) / p
    rows[:, :k] = X * g_eta[:, None]
    hi_mask = y <= n_cut  # z_hi finite: cut index y-1
    lo_mask = y >= 2  # z_lo finite: cut index y-2
    rows[np.nonzero(hi_mask)[0], k + y[hi_mask] - 1] += (fhi / p)[hi_mask]
    rows[np.nonzero(lo_mask)[0], k + y[lo_mask] - 2] += (-flo / p)[lo_mask]
    return rows


def ologit_chunk(X, y, beta, cut, link):
    """Reduced (loglik, grad, hess, n_floored) over one chunk, natural parameters."""
    n, k = X.shape
    n_cut = len(cut)
    p, n_floored, fhi, flo, fphi, fplo = _ologit_parts(X, y, beta, cut, link)
    ll = float(np.log(p).sum())

    d = (fhi - flo) / p
    g_eta = -d
    grad = np.zeros(k + n_cut)
    if k:
        grad[:k] = X.T @ g_eta
    hi_mask = y <= n_cut
    lo_mask = y >= 2
    idx_hi = y[hi_mask] - 1
    idx_lo = y[lo_mask] - 2
    grad[k:] += np.bincount(idx_hi, weights=(fhi / p)[hi_mask], minlength=n_cut)
    grad[k:] -= np.bincount(idx_lo, weights=(flo / p)[lo_mask], minlength=n_cut)

    hess = np.zeros((k + n_cut, k + n_cut))
    w_ee = (fphi - fplo) / p - d * d
    if k:
        hess[:k, :k] = X.T @ (X * w_ee[:, None])
    # cross terms d2/d(eta)d(a_c), scattered by which cut bounds each row
    w_hi = -fphi / p + fhi * d / p
    w_lo = fplo / p - flo * d / p
    if k:
        Wa = np.zeros((n, n_cut))
        Wa[np.nonzero(hi_mask)[0], idx_hi] += w_hi[hi_mask]
        Wa[np.nonzero(lo_mask)[0], idx_lo] += w_lo[lo_mask]
        hess[:k, k:] = X.T @ Wa
        hess[k:, :k] = hess[:k, k:].T
    # cutpoint block: diagonals plus the adjacent (a_{y-1}, a_{y-2}) pairs
    w_hh = fphi / p - (fhi / p) ** 2
    w_ll = -fplo / p - (flo / p) ** 2
    diag = np.zeros(n_cut)  # bincount yields int64 when a mask is empty
    diag += np.bincount(idx_hi, weights=w_hh[hi_mask], minlength=n_cut)
    diag += np.bincount(idx_lo, weights=w_ll[lo_mask], minlength=n_cut)
    hess[k:, k:][np.diag_indices(n_cut)] += diag
    both = hi_mask & lo_mask
    if np.any(both) and n_cut >= 2:
        w_x = (fhi * flo / (p * p))[both]
        sub = np.bincount(y[both] - 2, weights=w_x, minlength=n_cut - 1)
        for c in range(n_cut - 1):
            hess[k + c + 1, k + c] += sub[c]
            hess[k + c, k + c + 1] += sub[c]
    return ll, grad, hess, n_floored


def _mnl_probs_matrix(X, coef, baseline, n_categories):
    n = X.shape[0]
    Z = np.column_stack([np.ones(n), X])
    eta = np.zeros((n, n_categories))
    others = [c for c in range(1, n_categories + 1) if c != baseline]
    for j, c in enumerate(others):
        eta[:, c - 1] = Z @ coef[j]
    m = eta.max(axis=1, keepdims=True)
    e = np.exp(eta - m)
    p = e / e.sum(axis=1, keepdims=True)
    return p, Z, others


def mnl_terms(X, y, coef, baseline, n_categories):
    """Per-row log-probabilities for the baseline-category MNL."""
    p, _, _ = _mnl_probs_matrix(X, coef, baseline, n_categories)
    chosen = p[np.arange(len(y)), y - 1]
    n_floored = int(np.count_nonzero(chosen < TINY))
    return np.log(np.maximum(chosen, TINY)), n_floored


def mnl_score_rows(X, y, coef, baseline, n_categories):
    """Per-row gradient contributions, flat (C-1)(k+1) layout."""
    p, Z, others = _mnl_probs_matrix(X, coef, baseline, n_categories)
    n, kp1 = Z.shape
    rows = np.empty((n, len(others) * kp1))
    for j, c in enumerate(others):
        g = (y == c).astype(np.float64) - p[:, c - 1]
        rows[:, j * kp1 : (j + 1) * kp1] = Z * g[:, None]
    return rows


def mnl_chunk(X, y, coef, baseline, n_categories):
    """Reduced (loglik, grad, hess, n_floored) over one chunk."""
    p, Z, others = _mnl_probs_matrix(X, coef, baseline, n_categories)
    n, kp1 = Z.shape
    chosen = p[np.arange(n), y - 1]
    n_floored = int(np.count_nonzero(chosen < TINY))
    ll = float(np.log(np.maximum(chosen, TINY)).sum())
    n_par = len(others) * kp1
    grad = np.empty(n_par)
    hess = np.empty((n_par, n_par))
    for j, c in enumerate(others):
        g = (y == c).astype(np.float64) - p[:, c - 1]
        grad[j * kp1 : (j + 1) * kp1] = Z.T @ g
        for l, d_cat in enumerate(others):
            w = p[:, c - 1] * ((c == d_cat) - p[:, d_cat - 1])
            block = -(Z.T @ (Z * w[:, None]))
            hess[j * kp1 : (j + 1) * kp1, l * kp1 : (l + 1) * kp1] = block
    return ll, grad, hess, n_floored
