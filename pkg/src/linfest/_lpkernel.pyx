# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled row-wise minimizer of sum_j w_j |t - x_j|^p.

Each row is rescaled to the unit interval of its support hull before the
root search, so large ``p`` neither overflows nor underflows.
"""

import numpy as np

from libc.math cimport fabs, pow, floor, isfinite

cdef int MAX_ITER = 300
cdef int INT_POW_MAX = 128


cdef inline double ipow(double x, int n) noexcept nogil:
    cdef double r = 1.0
    while n > 0:
        if n & 1:
            r *= x
        x *= x
        n >>= 1
    return r


cdef inline void deriv(const double[::1] x, const double[::1] w, Py_ssize_t L,
                       double u, double p, int ip, double *h, double *dh) noexcept nogil:
    """h = sum w sign(u-x)|u-x|^(p-1), dh = (p-1) sum w |u-x|^(p-2)."""
    cdef double acc = 0.0
    cdef double dacc = 0.0
    cdef double d, a, a2
    cdef Py_ssize_t j
    for j in range(L):
        if w[j] == 0.0:
            continue
        d = u - x[j]
        a = fabs(d)
        if a == 0.0:
            # |d|^(p-1) vanishes; the curvature term is w (p == 2) or unbounded (p < 2)
            if p < 2.0:
                dacc += 1e308
            elif p == 2.0:
                dacc += w[j]
            continue
        if ip >= 2:
            a2 = ipow(a, ip - 2)
        else:
            a2 = pow(a, p - 2.0)
        dacc += w[j] * a2
        if d >= 0:
            acc += w[j] * a2 * a
        else:
            acc -= w[j] * a2 * a
    h[0] = acc
    dh[0] = (p - 1.0) * dacc


cdef int solve_row(const double[::1] pts, const double[::1] wts, double[::1] buf,
                   double p, double tol, double *out) noexcept nogil:
    """Return 0 on success, 1 on non-finite derivative (out holds the offending t)."""
    cdef Py_ssize_t L = pts.shape[0]
    cdef Py_ssize_t j
    cdef double lo = 1e308, hi = -1e308, wsum = 0.0, mean = 0.0
    cdef double center, half, u, a, b, h, dh, step, unew, utol
    cdef int it, ip = -1
    for j in range(L):
        if wts[j] > 0.0:
            if pts[j] < lo:
                lo = pts[j]
            if pts[j] > hi:
                hi = pts[j]
            wsum += wts[j]
            mean += wts[j] * pts[j]
    if wsum <= 0.0:
        out[0] = 0.0
        return 1
    if hi - lo <= 0.0:
        out[0] = lo
        return 0
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    for j in range(L):
        buf[j] = (pts[j] - center) / half
    if p == floor(p) and p <= INT_POW_MAX:
        ip = <int> p
    utol = tol / half
    if utol < 1e-15:
        utol = 1e-15
    a = -1.0
    b = 1.0
    u = (mean / wsum - center) / half
    if u <= a or u >= b:
        u = 0.0
    for it in range(MAX_ITER):
        deriv(buf, wts, L, u, p, ip, &h, &dh)
        if not isfinite(h):
            out[0] = center + half * u
            return 1
        if h == 0.0:
            break
        if h < 0.0:
            a = u
        else:
            b = u
        if isfinite(dh) and dh > 0.0:
            unew = u - h / dh
            if unew <= a or unew >= b:
                unew = 0.5 * (a + b)
        else:
            unew = 0.5 * (a + b)
        step = fabs(unew - u)
        u = unew
        if step <= utol or b - a <= utol:
            break
    out[0] = center + half * u
    return 0


def lp_minimize(pts, wts, double p, double tol=1e-12):
    """Minimize each row's objective; ``pts`` and ``wts`` are (R, L) float arrays.

    Returns ``(t, bad)``: minimizers and the index of the first row whose
    derivative went non-finite (-1 if none).
    """
    cdef double[:, ::1] X = np.ascontiguousarray(pts, dtype=np.float64)
    cdef double[:, ::1] W = np.ascontiguousarray(wts, dtype=np.float64)
    cdef Py_ssize_t R = X.shape[0], L = X.shape[1], r
    out = np.empty(R, dtype=np.float64)
    cdef double[::1] o = out
    cdef double[::1] buf = np.empty(max(L, 1), dtype=np.float64)
    cdef Py_ssize_t bad = -1
    cdef double t
    if p <= 1.0:
        raise ValueError("compiled kernel requires p > 1")
    with nogil:
        for r in range(R):
            if solve_row(X[r], W[r], buf, p, tol, &t) != 0:
                o[r] = t
                if bad < 0:
                    bad = r
            else:
                o[r] = t
    return out, bad
