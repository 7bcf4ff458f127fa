# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: Hénon chain, VAR recurrence, brute-force KNN search."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()


def henon_chain(history, Py_ssize_t steps, double coupling, double bound=10.0):
    cdef double[:, ::1] hist = np.ascontiguousarray(history, dtype=np.float64)
    cdef Py_ssize_t K = hist.shape[1]
    out_arr = np.zeros((steps, K))
    cdef double[:, ::1] out = out_arr
    cdef double[::1] xm2 = np.array(hist[0], dtype=np.float64)
    cdef double[::1] xm1 = np.array(hist[1], dtype=np.float64)
    cdef double[::1] x = np.zeros(K)
    cdef double c = coupling
    cdef double nb, drive
    cdef Py_ssize_t s, k
    cdef bint bad
    for s in range(steps):
        bad = False
        for k in range(K):
            if K == 1:
                drive = xm1[0]
            else:
                if k == 0:
                    nb = xm1[1]
                elif k == K - 1:
                    nb = xm1[K - 2]
                else:
                    nb = (xm1[k - 1] + xm1[k + 1]) * 0.5
                drive = c * nb + (1.0 - c) * xm1[k]
            x[k] = 1.4 - drive * drive + 0.3 * xm2[k]
            out[s, k] = x[k]
            if fabs(x[k]) > bound or not isfinite(x[k]):
                bad = True
        if bad:
            return out_arr, s
        for k in range(K):
            xm2[k] = xm1[k]
            xm1[k] = x[k]
    return out_arr, steps


def var_simulate(coefs, noise, init):
    cdef double[:, :, ::1] phi = np.ascontiguousarray(coefs, dtype=np.float64)
    cdef double[:, ::1] eps = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t P = phi.shape[0], K = phi.shape[1], N = eps.shape[0]
    buf_arr = np.zeros((N + P, K))
    buf_arr[:P] = init
    cdef double[:, ::1] buf = buf_arr
    cdef Py_ssize_t t, tau, i, j
    cdef double acc
    for t in range(N):
        for i in range(K):
            acc = eps[t, i]
            for tau in range(1, P + 1):
                for j in range(K):
                    acc += phi[tau - 1, i, j] * buf[P + t - tau, j]
            buf[P + t, i] = acc
    return buf_arr[P:]


def knn_indices(queries, train, Py_ssize_t k):
    cdef double[:, ::1] q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef double[:, ::1] tr = np.ascontiguousarray(train, dtype=np.float64)
    cdef Py_ssize_t Q = q.shape[0], D = q.shape[1], N = tr.shape[0]
    out_arr = np.empty((Q, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef double[::1] best_d = np.empty(k)
    cdef cnp.int64_t[::1] best_i = np.empty(k, dtype=np.int64)
    cdef Py_ssize_t a, n, j, filled, pos
    cdef double d, diff
    for a in range(Q):
        filled = 0
        for n in range(N):
            d = 0.0
            for j in range(D):
                diff = tr[n, j] - q[a, j]
                d += diff * diff
            # strict comparison keeps the earlier index ahead on ties
            if filled == k and d >= best_d[k - 1]:
                continue
            pos = filled if filled < k else k - 1
            while pos > 0 and best_d[pos - 1] > d:
                if pos < k:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                pos -= 1
            best_d[pos] = d
            best_i[pos] = n
            if filled < k:
                filled += 1
        for j in range(k):
            out[a, j] = best_i[j]
    return out_arr
