# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled per-entry hot kernels.

Mirrors `_kernels_np` exactly (same contracts, same arithmetic order per
entry) but runs as tight C loops. Selected automatically at import by
`xcp.kernels` when available.
"""

import numpy as np

BACKEND = "c"


def predict_entries(
    double[:, :, ::1] A, double[:, :, ::1] B, double[:, ::1] C,
    double[::1] d, double[::1] e, double[::1] f,
    long long[::1] ii, long long[::1] jj, long long[::1] kk,
    double[::1] out,
):
    """Model value for each (ii[t], jj[t], kk[t]), written into `out`."""
    cdef Py_ssize_t n = ii.shape[0]
    cdef Py_ssize_t M = A.shape[1]
    cdef Py_ssize_t R = A.shape[2]
    cdef Py_ssize_t t, m, r
    cdef long long i, j, k
    cdef double s
    cdef double[::1] inter = np.empty(R, dtype=np.float64)

    for t in range(n):
        i = ii[t]; j = jj[t]; k = kk[t]
        for r in range(R):
            inter[r] = 0.0
        for m in range(M):
            for r in range(R):
                inter[r] += A[i, m, r] * B[j, m, r]
        s = 0.0
        for r in range(R):
            s += inter[r] * C[k, r]
        out[t] = s + d[i] + e[j] + f[k]
    return np.asarray(out)


def accumulate_epoch(
    double[:, :, ::1] A, double[:, :, ::1] B, double[:, ::1] C,
    double[::1] d, double[::1] e, double[::1] f,
    long long[::1] ii, long long[::1] jj, long long[::1] kk,
    double[::1] y, double lam,
    double[:, :, ::1] num_a, double[:, :, ::1] den_a,
    double[:, :, ::1] num_b, double[:, :, ::1] den_b,
    double[:, ::1] num_c, double[:, ::1] den_c,
    double[::1] num_d, double[::1] den_d,
    double[::1] num_e, double[::1] den_e,
    double[::1] num_f, double[::1] den_f,
):
    """One pass over the entry arrays, adding every parameter's update
    numerator and denominator terms into the given accumulators.

    See `_kernels_np.accumulate_epoch` for the per-entry term definitions;
    this function computes the same sums in the same entry order.
    """
    cdef Py_ssize_t n = ii.shape[0]
    cdef Py_ssize_t M = A.shape[1]
    cdef Py_ssize_t R = A.shape[2]
    cdef Py_ssize_t t, m, r
    cdef long long i, j, k
    cdef double s, yhat, yt, bc, ac
    cdef double[::1] inter = np.empty(R, dtype=np.float64)

    for t in range(n):
        i = ii[t]; j = jj[t]; k = kk[t]
        yt = y[t]

        for r in range(R):
            inter[r] = 0.0
        for m in range(M):
            for r in range(R):
                inter[r] += A[i, m, r] * B[j, m, r]
        s = 0.0
        for r in range(R):
            s += inter[r] * C[k, r]
        yhat = s + d[i] + e[j] + f[k]

        for m in range(M):
            for r in range(R):
                bc = B[j, m, r] * C[k, r]
                ac = A[i, m, r] * C[k, r]
                num_a[i, m, r] += yt * bc
                den_a[i, m, r] += lam * A[i, m, r] + yhat * bc
                num_b[j, m, r] += yt * ac
                den_b[j, m, r] += lam * B[j, m, r] + yhat * ac
        for r in range(R):
            num_c[k, r] += yt * inter[r]
            den_c[k, r] += lam * C[k, r] + yhat * inter[r]
        num_d[i] += yt
        den_d[i] += lam * d[i] + yhat
        num_e[j] += yt
        den_e[j] += lam * e[j] + yhat
        num_f[k] += yt
        den_f[k] += lam * f[k] + yhat
