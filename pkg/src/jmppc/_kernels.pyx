# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: local polynomial regression and pairwise concordance counts."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


cdef inline double tricube(double u) nogil:
    cdef double a
    if u >= 1.0:
        return 0.0
    a = 1.0 - u * u * u
    return a * a * a


cdef int solve_local(double[:, ::1] M, double[::1] rhs, int p, double[::1] out,
                     double[::1] inv00) nogil:
    """Gaussian elimination with partial pivoting on a p x p system (p <= 3).

    Writes the solution to ``out`` and the (0, 0) element of the inverse to
    ``inv00[0]``. Returns 0 when the system is numerically singular.
    """
    cdef double A[3][4]
    cdef double E[3][3]
    cdef int i, j, k, piv
    cdef double f, tmp, scale = 0.0
    for i in range(p):
        for j in range(p):
            A[i][j] = M[i, j]
            E[i][j] = 1.0 if i == j else 0.0
            if fabs(M[i, j]) > scale:
                scale = fabs(M[i, j])
        A[i][p] = rhs[i]
    if scale == 0.0:
        return 0
    for k in range(p):
        piv = k
        for i in range(k + 1, p):
            if fabs(A[i][k]) > fabs(A[piv][k]):
                piv = i
        if fabs(A[piv][k]) <= 1e-12 * scale:
            return 0
        if piv != k:
            for j in range(p + 1):
                tmp = A[k][j]; A[k][j] = A[piv][j]; A[piv][j] = tmp
            for j in range(p):
                tmp = E[k][j]; E[k][j] = E[piv][j]; E[piv][j] = tmp
        for i in range(k + 1, p):
            f = A[i][k] / A[k][k]
            for j in range(k, p + 1):
                A[i][j] -= f * A[k][j]
            for j in range(p):
                E[i][j] -= f * E[k][j]
    for i in range(p - 1, -1, -1):
        tmp = A[i][p]
        for j in range(i + 1, p):
            tmp -= A[i][j] * out[j]
        out[i] = tmp / A[i][i]
    # first column of the inverse: back-substitute the transformed unit vector
    cdef double col[3]
    for i in range(p - 1, -1, -1):
        tmp = E[i][0]
        for j in range(i + 1, p):
            tmp -= A[i][j] * col[j]
        col[i] = tmp / A[i][i]
    inv00[0] = col[0]
    return 1


def loess_kernel(const double[::1] x, const double[::1] y, const double[::1] rw,
                 const double[::1] x_eval, int q, int degree, bint want_hat):
    """Tricube-weighted local polynomial fits at ``x_eval``.

    ``x`` must be sorted ascending. The bandwidth at each target is the
    distance to its q-th nearest training point. Returns (fitted, hat) where
    hat[i] is the (0, 0) element of the inverse local moment matrix (the
    smoother's diagonal when x_eval is the training set).
    """
    cdef Py_ssize_t N = x.shape[0], m = x_eval.shape[0]
    cdef Py_ssize_t i, j, lo, hi, k
    cdef double x0, h, u, w, dl, dr, uk
    cdef int p, d, ok
    cdef double[::1] fit = np.empty(m)
    cdef double[::1] hat = np.full(m, np.nan)
    cdef double[:, ::1] M = np.zeros((3, 3))
    cdef double[::1] rhs = np.zeros(3)
    cdef double[::1] sol = np.zeros(3)
    cdef double[::1] inv00 = np.zeros(1)
    cdef double mom[5]
    cdef double my[3]
    if q > N:
        q = N
    with nogil:
        for i in range(m):
            x0 = x_eval[i]
            # locate q nearest neighbours as a contiguous window [lo, hi)
            lo = 0
            hi = N
            while lo < hi:
                j = (lo + hi) // 2
                if x[j] < x0:
                    lo = j + 1
                else:
                    hi = j
            hi = lo
            for k in range(q):
                if lo == 0:
                    hi += 1
                elif hi == N:
                    lo -= 1
                else:
                    dl = x0 - x[lo - 1]
                    dr = x[hi] - x0
                    if dl <= dr:
                        lo -= 1
                    else:
                        hi += 1
            h = x0 - x[lo]
            if x[hi - 1] - x0 > h:
                h = x[hi - 1] - x0
            if h <= 0.0:
                h = 1.0
            for k in range(5):
                mom[k] = 0.0
            for k in range(3):
                my[k] = 0.0
            for j in range(lo, hi):
                u = (x[j] - x0) / h
                w = tricube(fabs(u)) * rw[j]
                if w == 0.0:
                    continue
                uk = w
                for k in range(5):
                    mom[k] += uk
                    if k < 3:
                        my[k] += uk * y[j]
                    uk *= u
            ok = 0
            d = degree
            while d >= 0 and not ok:
                p = d + 1
                for j in range(p):
                    for k in range(p):
                        M[j, k] = mom[j + k]
                    rhs[j] = my[j]
                ok = solve_local(M, rhs, p, sol, inv00)
                d -= 1
            if ok:
                fit[i] = sol[0]
                hat[i] = inv00[0]
            else:
                fit[i] = 0.0
                for j in range(lo, hi):
                    fit[i] += y[j]
                fit[i] /= (hi - lo)
    return np.asarray(fit), np.asarray(hat)


def concordance_kernel(const double[::1] marker, const double[::1] time,
                       const long[::1] status, const double[::1] weight, double tau):
    """Weighted concordance sums over comparable pairs.

    A pair (i, j) is comparable when time[i] < time[j], status[i] == 1 and
    time[i] < tau; it is concordant when marker[i] > marker[j] and counts one
    half on ties. Returns (numerator, denominator).
    """
    cdef Py_ssize_t n = marker.shape[0], i, j
    cdef double num = 0.0, den = 0.0, wi
    with nogil:
        for i in range(n):
            if status[i] != 1 or not time[i] < tau:
                continue
            wi = weight[i]
            for j in range(n):
                if time[i] < time[j]:
                    den += wi
                    if marker[i] > marker[j]:
                        num += wi
                    elif marker[i] == marker[j]:
                        num += 0.5 * wi
    return num, den
