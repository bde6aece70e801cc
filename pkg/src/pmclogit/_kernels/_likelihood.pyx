# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled hot kernels: fused per-chunk (loglik, gradient, Hessian) reductions
# for the ordered-logit and baseline-category MNL models. Row-wise helpers
# (per-row terms / score rows) live in likelihood_py; contracts are identical.

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, M_SQRT1_2, erfc, exp, log, sqrt

cnp.import_array()

cdef double TINY = 2.2250738585072014e-308  # smallest positive normal double
cdef double INV_SQRT_2PI = 0.3989422804014327

compiled = True


cdef inline double _cdf(double z, int link) noexcept nogil:
    cdef double e
    if link == 0:
        if z >= 0.0:
            return 1.0 / (1.0 + exp(-z))
        e = exp(z)
        return e / (1.0 + e)
    return 0.5 * erfc(-z * M_SQRT1_2)


cdef inline void _cdf_pdf_dpdf(double z, int link, double* F, double* f,
                               double* fp) noexcept nogil:
    cdef double Fz, fz
    Fz = _cdf(z, link)
    if link == 0:
        fz = Fz * (1.0 - Fz)
        fp[0] = fz * (1.0 - 2.0 * Fz)
    else:
        fz = INV_SQRT_2PI * exp(-0.5 * z * z)
        fp[0] = -z * fz
    F[0] = Fz
    f[0] = fz


def ologit_chunk(double[:, ::1] X, cnp.int64_t[::1] y, double[::1] beta,
                 double[::1] cut, int link):
    """Reduced (loglik, grad, hess, n_floored) over one chunk, natural parameters."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t k = X.shape[1]
    cdef Py_ssize_t ncut = cut.shape[0]
    cdef Py_ssize_t npar = k + ncut
    grad_arr = np.zeros(npar)
    hess_arr = np.zeros((npar, npar))
    cdef double[::1] g = grad_arr
    cdef double[:, ::1] H = hess_arr
    cdef double ll = 0.0
    cdef Py_ssize_t n_floored = 0
    cdef Py_ssize_t i, j, m, yi, chi, clo
    cdef bint hi, lo
    cdef double eta, z_hi, z_lo, Fhi, fhi, fphi, Flo, flo, fplo, p, d, xj
    cdef double w_ee, w_hi, w_lo

    with nogil:
        for i in range(n):
            eta = 0.0
            for j in range(k):
                eta += X[i, j] * beta[j]
            yi = <Py_ssize_t> y[i]
            hi = yi <= ncut
            lo = yi >= 2
            z_hi = cut[yi - 1] - eta if hi else INFINITY
            z_lo = cut[yi - 2] - eta if lo else -INFINITY
            if hi:
                _cdf_pdf_dpdf(z_hi, link, &Fhi, &fhi, &fphi)
            else:
                Fhi = 1.0; fhi = 0.0; fphi = 0.0
            if lo:
                _cdf_pdf_dpdf(z_lo, link, &Flo, &flo, &fplo)
            else:
                Flo = 0.0; flo = 0.0; fplo = 0.0
            if z_hi + z_lo > 0.0:
                # survival form avoids cancellation in upper-tail brackets
                p = (_cdf(-z_lo, link) if lo else 1.0) - (_cdf(-z_hi, link) if hi else 0.0)
            else:
                p = Fhi - Flo
            if p < TINY:
                p = TINY
                n_floored += 1
            ll += log(p)
            d = (fhi - flo) / p

            for j in range(k):
                g[j] -= d * X[i, j]
            chi = k + yi - 1
            clo = k + yi - 2
            if hi:
                g[chi] += fhi / p
            if lo:
                g[clo] -= flo / p

            w_ee = (fphi - fplo) / p - d * d
            for j in range(k):
                xj = X[i, j]
                for m in range(j, k):
                    H[j, m] += w_ee * xj * X[i, m]
            if hi:
                w_hi = -fphi / p + fhi * d / p
                for j in range(k):
                    H[j, chi] += w_hi * X[i, j]
                H[chi, chi] += fphi / p - (fhi / p) * (fhi / p)
            if lo:
                w_lo = fplo / p - flo * d / p
                for j in range(k):
                    H[j, clo] += w_lo * X[i, j]
                H[clo, clo] += -fplo / p - (flo / p) * (flo / p)
            if hi and lo:
                H[clo, chi] += fhi * flo / (p * p)
        # accumulated upper triangle only
        for i in range(npar):
            for j in range(i + 1, npar):
                H[j, i] = H[i, j]
    return ll, grad_arr, hess_arr, int(n_floored)


def mnl_chunk(double[:, ::1] X, cnp.int64_t[::1] y, double[:, ::1] coef,
              int baseline, int n_categories):
    """Reduced (loglik, grad, hess, n_floored) for the baseline-category MNL."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t k = X.shape[1]
    cdef Py_ssize_t kp1 = k + 1
    cdef Py_ssize_t nnb = n_categories - 1
    cdef Py_ssize_t npar = nnb * kp1

    others_arr = np.array(
        [c for c in range(1, n_categories + 1) if c != baseline], dtype=np.int64
    )
    cdef cnp.int64_t[::1] others = others_arr
    grad_arr = np.zeros(npar)
    hess_arr = np.zeros((npar, npar))
    eta_arr = np.empty(nnb)
    p_arr = np.empty(nnb)
    z_arr = np.empty(kp1)
    cdef double[::1] g = grad_arr
    cdef double[:, ::1] H = hess_arr
    cdef double[::1] eta = eta_arr
    cdef double[::1] p = p_arr
    cdef double[::1] z = z_arr
    cdef double ll = 0.0
    cdef Py_ssize_t n_floored = 0
    cdef Py_ssize_t i, j, l, a, b, yi
    cdef double mx, denom, chosen, gj, w

    with nogil:
        for i in range(n):
            z[0] = 1.0
            for a in range(k):
                z[a + 1] = X[i, a]
            mx = 0.0
            for j in range(nnb):
                eta[j] = coef[j, 0]
                for a in range(k):
                    eta[j] += coef[j, a + 1] * X[i, a]
                if eta[j] > mx:
                    mx = eta[j]
            denom = exp(-mx)  # baseline category, eta = 0
            for j in range(nnb):
                p[j] = exp(eta[j] - mx)
                denom += p[j]
            chosen = exp(-mx) / denom
            yi = <Py_ssize_t> y[i]
            for j in range(nnb):
                p[j] /= denom
                if others[j] == yi:
                    chosen = p[j]
            if chosen < TINY:
                chosen = TINY
                n_floored += 1
            ll += log(chosen)

            for j in range(nnb):
                gj = (1.0 if others[j] == yi else 0.0) - p[j]
                for a in range(kp1):
                    g[j * kp1 + a] += gj * z[a]
            for j in range(nnb):
                for l in range(j, nnb):
                    w = -p[j] * ((1.0 if j == l else 0.0) - p[l])
                    if j == l:
                        for a in range(kp1):
                            for b in range(a, kp1):
                                H[j * kp1 + a, l * kp1 + b] += w * z[a] * z[b]
                    else:
                        for a in range(kp1):
                            for b in range(kp1):
                                H[j * kp1 + a, l * kp1 + b] += w * z[a] * z[b]
        for i in range(npar):
            for j in range(i + 1, npar):
                H[j, i] = H[i, j]
    return ll, grad_arr, hess_arr, int(n_floored)
