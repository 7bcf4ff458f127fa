"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Both backends perform the same floating-point operations in the same order
for the Hénon recurrence and the KNN distances, so they agree bitwise there.
The VAR recurrence uses BLAS matrix-vector products here, which may differ
from the compiled loop in the last bits.
"""

import numpy as np


def henon_chain(history, steps, coupling, bound=10.0):
    """Iterate the chain-coupled Hénon maps.

    ``history`` holds the rows (x[t-2], x[t-1]).  Returns ``(out, valid)``
    where ``out`` has ``steps`` rows and ``valid`` is the number of rows
    computed before some |x| exceeded ``bound`` (``steps`` if none did).
    """
    history = np.asarray(history, dtype=np.float64)
    K = history.shape[1]
    out = np.zeros((steps, K))
    xm2 = history[0].copy()
    xm1 = history[1].copy()
    c = float(coupling)
    for s in range(steps):
        if K == 1:
            drive = xm1.copy()
        else:
            nb = np.empty(K)
            nb[0] = xm1[1]
            nb[-1] = xm1[-2]
            if K > 2:
                nb[1:-1] = (xm1[:-2] + xm1[2:]) * 0.5
            drive = c * nb + (1.0 - c) * xm1
        x = 1.4 - drive * drive + 0.3 * xm2
        out[s] = x
        if np.any(np.abs(x) > bound) or not np.all(np.isfinite(x)):
            return out, s
        xm2, xm1 = xm1, x
    return out, steps


def var_simulate(coefs, noise, init):
    """x[t] = sum_tau coefs[tau-1] @ x[t-tau] + noise[t].

    ``init`` holds the P rows preceding the first simulated step, oldest first.
    """
    coefs = np.asarray(coefs, dtype=np.float64)
    P, K, _ = coefs.shape
    N = noise.shape[0]
    buf = np.zeros((N + P, K))
    buf[:P] = init
    for t in range(N):
        x = noise[t].copy()
        for tau in range(1, P + 1):
            x += coefs[tau - 1] @ buf[P + t - tau]
        buf[P + t] = x
    return buf[P:]


def knn_indices(queries, train, k):
    """Indices of the ``k`` nearest training rows per query, ranked by (distance, index)."""
    Q, D = queries.shape
    N = train.shape[0]
    out = np.empty((Q, k), dtype=np.int64)
    chunk = max(1, 2_000_000 // max(N, 1))
    for start in range(0, Q, chunk):
        q = queries[start:start + chunk]
        dist = np.zeros((q.shape[0], N))
        for j in range(D):
            diff = train[None, :, j] - q[:, j, None]
            dist += diff * diff
        out[start:start + chunk] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return out
