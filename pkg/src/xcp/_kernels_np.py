"""Pure-numpy fallback for the per-entry hot kernels.

Same contracts as the compiled module `_kernels_cy`: callers preallocate
output buffers and pass C-contiguous float64 arrays. Entries are processed
in fixed blocks so memory stays bounded and accumulation order (hence the
result) is deterministic for a given input.
"""

import numpy as np

BACKEND = "python"

# Entries per block; bounds the (block, M, R) temporaries.
_BLOCK = 32768


def predict_entries(A, B, C, d, e, f, ii, jj, kk, out):
    """Model value for each (ii[t], jj[t], kk[t]), written into `out`."""
    n = ii.shape[0]
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        i, j, k = ii[lo:hi], jj[lo:hi], kk[lo:hi]
        inter = np.einsum("tmr,tmr->tr", A[i], B[j])
        out[lo:hi] = np.einsum("tr,tr->t", inter, C[k]) + d[i] + e[j] + f[k]
    return out


def _scatter_rows(target, rows, vals):
    """target[rows[t]] += vals[t], rows may repeat; summation in entry order."""
    width = vals[0].size
    flat_idx = rows[:, None] * width + np.arange(width, dtype=np.int64)
    target.reshape(-1)[:] += np.bincount(
        flat_idx.reshape(-1), weights=vals.reshape(-1), minlength=target.size
    )


def accumulate_epoch(
    A, B, C, d, e, f, ii, jj, kk, y, lam,
    num_a, den_a, num_b, den_b, num_c, den_c,
    num_d, den_d, num_e, den_e, num_f, den_f,
):
    """One pass over the entry arrays, adding every parameter's update
    numerator and denominator terms into the given accumulators.

    Per entry with value y and model value yhat (computed from the arrays
    as passed, i.e. the start-of-epoch state):

      factor A[i,m,r]:  num += y * B[j,m,r] * C[k,r]
                        den += lam * A[i,m,r] + yhat * B[j,m,r] * C[k,r]
      factor B[j,m,r]:  symmetric, with A and B swapped
      factor C[k,r]:    num += y * inter_r
                        den += lam * C[k,r] + yhat * inter_r
                        where inter_r = sum_m A[i,m,r] * B[j,m,r]
      bias d[i]:        num += y, den += lam * d[i] + yhat
      biases e[j], f[k]: symmetric
    """
    n = ii.shape[0]
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        i, j, k = ii[lo:hi], jj[lo:hi], kk[lo:hi]
        yt = y[lo:hi]

        ai = A[i]  # (t, M, R)
        bj = B[j]
        ck = C[k]  # (t, R)
        inter = np.einsum("tmr,tmr->tr", ai, bj)
        yhat = np.einsum("tr,tr->t", inter, ck) + d[i] + e[j] + f[k]

        bc = bj * ck[:, None, :]
        ac = ai * ck[:, None, :]
        _scatter_rows(num_a, i, yt[:, None, None] * bc)
        _scatter_rows(den_a, i, lam * ai + yhat[:, None, None] * bc)
        _scatter_rows(num_b, j, yt[:, None, None] * ac)
        _scatter_rows(den_b, j, lam * bj + yhat[:, None, None] * ac)
        _scatter_rows(num_c, k, yt[:, None] * inter)
        _scatter_rows(den_c, k, lam * ck + yhat[:, None] * inter)

        num_d += np.bincount(i, weights=yt, minlength=num_d.size)
        den_d += np.bincount(i, weights=lam * d[i] + yhat, minlength=den_d.size)
        num_e += np.bincount(j, weights=yt, minlength=num_e.size)
        den_e += np.bincount(j, weights=lam * e[j] + yhat, minlength=den_e.size)
        num_f += np.bincount(k, weights=yt, minlength=num_f.size)
        den_f += np.bincount(k, weights=lam * f[k] + yhat, minlength=den_f.size)
