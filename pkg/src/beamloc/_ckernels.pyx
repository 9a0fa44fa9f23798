# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np

from libc.math cimport INFINITY, ceil, erfc, exp, expm1, fabs, floor, log, log1p

cdef double SNAP_Z = 8.0
cdef double INV_SQRT2 = 0.7071067811865476
# below this a pmf value is handled in log space
cdef double LIN_FLOOR = 1e-150


cdef inline double _logaddexp(double a, double b) noexcept nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


cdef inline double _xlogy(double x, double y) noexcept nogil:
    if x == 0.0:
        return 0.0
    if y == 0.0:
        return -INFINITY
    return x * log(y)


def mixture_profile(const double[::1] gammas, const long long[::1] mtilde,
                    const long long[::1] offsets, const long long[::1] xs,
                    const double[::1] cnt, const double[::1] lp1, const double[::1] lp2,
                    double eta1, double eta2, double lam, double sigma_b):
    cdef Py_ssize_t n = gammas.shape[0]
    cdef Py_ssize_t L = mtilde.shape[0]
    cdef Py_ssize_t nx = lp1.shape[0]
    cdef Py_ssize_t j, k, t, a, b
    cdef long long x
    cdef double r1 = -expm1(-eta1)
    cdef double r2 = -expm1(-eta2)
    cdef double g, z, w1, w2, lw1, lw2, acc, s

    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    # snapped per-location constants; prefix/suffix sums avoid inf - inf
    pre_arr = np.zeros(L + 1)
    suf_arr = np.zeros(L + 1)
    p1_arr = np.exp(np.asarray(lp1))
    p2_arr = np.exp(np.asarray(lp2))
    cdef double[::1] pre1 = pre_arr
    cdef double[::1] suf2 = suf_arr
    cdef double[::1] p1 = p1_arr
    cdef double[::1] p2 = p2_arr
    lin_arr = np.asarray((p1_arr > LIN_FLOOR) & (p2_arr > LIN_FLOOR), dtype=np.uint8)
    cdef unsigned char[::1] lin = lin_arr
    cdef double[::1] c1 = np.empty(L)
    cdef double[::1] c2 = np.empty(L)

    with nogil:
        for k in range(L):
            c1[k] = -lam * r1
            c2[k] = -lam * r2
            for t in range(offsets[k], offsets[k + 1]):
                c1[k] += cnt[t] * lp1[xs[t]]
                c2[k] += cnt[t] * lp2[xs[t]]
        for k in range(L):
            pre1[k + 1] = pre1[k] + c1[k]
        for k in range(L - 1, -1, -1):
            suf2[k] = suf2[k + 1] + c2[k]

        for j in range(n):
            g = gammas[j]
            a = <Py_ssize_t>floor(g - SNAP_Z * sigma_b) - 1
            b = <Py_ssize_t>ceil(g + SNAP_Z * sigma_b) + 2
            if a < 0:
                a = 0
            if b > L:
                b = L
            if a > L:
                a = L
            if b < a:
                b = a
            acc = pre1[a] + suf2[b]
            for k in range(a, b):
                z = (g - k) / sigma_b
                if z > SNAP_Z:
                    acc += c1[k]
                elif z < -SNAP_Z:
                    acc += c2[k]
                else:
                    w1 = 0.5 * erfc(-z * INV_SQRT2)
                    w2 = 0.5 * erfc(z * INV_SQRT2)
                    acc -= lam * (w1 * r1 + w2 * r2)
                    lw1 = log(w1)
                    lw2 = log(w2)
                    for t in range(offsets[k], offsets[k + 1]):
                        x = xs[t]
                        if lin[x]:
                            s = log(w1 * p1[x] + w2 * p2[x])
                        else:
                            s = _logaddexp(lw1 + lp1[x], lw2 + lp2[x])
                        acc += cnt[t] * s
            out[j] = acc
    return out_arr


def convolution_profile(const double[::1] gammas, const long long[::1] mtilde,
                        const double[::1] ysum, double eta1, double eta2,
                        double lam, double sigma_b):
    cdef Py_ssize_t n = gammas.shape[0]
    cdef Py_ssize_t L = mtilde.shape[0]
    cdef Py_ssize_t j, k, a, b
    cdef double g, z, mu, acc, m

    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    pre_arr = np.zeros(L + 1)
    suf_arr = np.zeros(L + 1)
    cdef double[::1] pre1 = pre_arr
    cdef double[::1] suf2 = suf_arr
    cdef double[::1] c1 = np.empty(L)
    cdef double[::1] c2 = np.empty(L)

    with nogil:
        for k in range(L):
            m = <double>mtilde[k]
            c1[k] = lam * expm1(-eta1) + _xlogy(ysum[k], eta1) - m * eta1
            c2[k] = lam * expm1(-eta2) + _xlogy(ysum[k], eta2) - m * eta2
        for k in range(L):
            pre1[k + 1] = pre1[k] + c1[k]
        for k in range(L - 1, -1, -1):
            suf2[k] = suf2[k + 1] + c2[k]

        for j in range(n):
            g = gammas[j]
            a = <Py_ssize_t>floor(g - SNAP_Z * sigma_b) - 1
            b = <Py_ssize_t>ceil(g + SNAP_Z * sigma_b) + 2
            if a < 0:
                a = 0
            if b > L:
                b = L
            if a > L:
                a = L
            if b < a:
                b = a
            acc = pre1[a] + suf2[b]
            for k in range(a, b):
                z = (g - k) / sigma_b
                if z > SNAP_Z:
                    acc += c1[k]
                elif z < -SNAP_Z:
                    acc += c2[k]
                else:
                    mu = 0.5 * erfc(-z * INV_SQRT2) * eta1 + 0.5 * erfc(z * INV_SQRT2) * eta2
                    acc += lam * expm1(-mu) + _xlogy(ysum[k], mu) - mtilde[k] * mu
            out[j] = acc
    return out_arr


def trm_series(w1_in, w2_in, lp1_in, lp2_in):
    cdef double[::1] w1 = np.ascontiguousarray(np.atleast_1d(w1_in), dtype=float)
    cdef double[::1] w2 = np.ascontiguousarray(np.atleast_1d(w2_in), dtype=float)
    cdef double[::1] lp1 = np.ascontiguousarray(lp1_in, dtype=float)
    cdef double[::1] lp2 = np.ascontiguousarray(lp2_in, dtype=float)
    cdef Py_ssize_t n = w1.shape[0]
    cdef Py_ssize_t nx = lp1.shape[0]
    cdef Py_ssize_t i, t
    cdef double hi, gap, acc, lmix, den

    log_d2_arr = np.empty(nx)
    p1_arr = np.exp(np.asarray(lp1))
    p2_arr = np.exp(np.asarray(lp2))
    cdef double[::1] log_d2 = log_d2_arr
    cdef double[::1] p1 = p1_arr
    cdef double[::1] p2 = p2_arr
    cdef double[::1] d2 = np.empty(nx)
    cdef unsigned char[::1] lin = np.empty(nx, dtype=np.uint8)
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr

    with nogil:
        for t in range(nx):
            hi = lp1[t] if lp1[t] > lp2[t] else lp2[t]
            gap = -fabs(lp1[t] - lp2[t])
            if hi == -INFINITY or gap == 0.0:
                log_d2[t] = -INFINITY
            else:
                log_d2[t] = 2.0 * (hi + log(-expm1(gap)))
            # squared gap from its log form: no cancellation when p1 ~ p2
            lin[t] = p1[t] > LIN_FLOOR and p2[t] > LIN_FLOOR and log_d2[t] > -700.0
            d2[t] = exp(log_d2[t])
        for i in range(n):
            acc = 0.0
            for t in range(nx):
                if log_d2[t] == -INFINITY:
                    continue
                if lin[t]:
                    den = w1[i] * p1[t] + w2[i] * p2[t]
                    acc += d2[t] / den
                else:
                    lmix = _logaddexp(log(w1[i]) + lp1[t], log(w2[i]) + lp2[t])
                    acc += exp(log_d2[t] - lmix)
            out[i] = acc
    return out_arr
