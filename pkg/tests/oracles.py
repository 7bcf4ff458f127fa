"""Independent reference computations used as test oracles.

Everything here is written with explicit Python loops and ``math`` so that it
shares no code path with the package under test.
"""

import csv
import math
from pathlib import Path

import numpy as np

FIXTURES = Path(__file__).parent / "fixtures"


def sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def naive_matvec(W, x):
    n, m = len(W), len(x)
    out = [0.0] * n
    for i in range(n):
        acc = 0.0
        for j in range(m):
            acc += W[i][j] * x[j]
        out[i] = acc
    return out


def _vsig(v):
    return [sig(a) for a in v]


def _vadd(*vs):
    return [sum(parts) for parts in zip(*vs)]


def lavarnet_grid(X, p, variant):
    """h[t][k] and y[t][k] of one window by explicit loops (0-based lists)."""
    T, K = len(X), len(X[0])
    n = len(p["b_h"])
    h = [[None] * K for _ in range(T)]
    for t in range(T):
        row = [X[t][k] for k in range(K)]
        for k in range(K):
            col = [X[s][k] for s in range(T)]
            terms = [naive_matvec(p["W_T"], row), naive_matvec(p["W_V"], col), list(p["b_h"])]
            if variant == "rlavarnet":
                prev = h[t - 1][k] if t > 0 else [0.0] * n
                terms.append(naive_matvec(p["U_h"], prev))
            elif variant == "frlavarnet":
                prev = [v for kk in range(K) for v in h[t - 1][kk]] if t > 0 else [0.0] * (n * K)
                terms.append(naive_matvec(p["U_tilde"], prev))
            h[t][k] = _vsig(_vadd(*terms))
    y = [[_vsig(_vadd(naive_matvec(p["W_y"], h[t][k]), p["b_y"])) for k in range(K)] for t in range(T)]
    return h, y


def lavarnet_predict(X, p, variant):
    T, K = len(X), len(X[0])
    _, y = lavarnet_grid(X, p, variant)
    K_out = len(p["head_b"])
    preds = []
    for i in range(K_out):
        vec = []
        for t in range(T):
            for k in range(K):
                a = p["A"][i][t][k]
                vec.extend(a * v for v in y[t][k])
        acc = p["head_b"][i]
        for w, v in zip(p["head_w"][i], vec):
            acc += w * v
        preds.append(acc)
    return preds


def rnn_predict(X, p):
    n = len(p["b_h"])
    h = [0.0] * n
    for x_t in X:
        h = _vsig(_vadd(naive_matvec(p["W_h"], list(x_t)), naive_matvec(p["U_h"], h), p["b_h"]))
    y = _vsig(_vadd(naive_matvec(p["W_y"], h), p["b_y"]))
    return _vadd(naive_matvec(p["head_w"], y), p["head_b"])


def lstm_cell(x_t, h, c, p):
    n = len(h)
    z = _vadd(naive_matvec(p["W"], list(x_t)), naive_matvec(p["U"], h), p["b"])
    i = [sig(v) for v in z[:n]]
    f = [sig(v) for v in z[n:2 * n]]
    g = [math.tanh(v) for v in z[2 * n:3 * n]]
    o = [sig(v) for v in z[3 * n:]]
    c = [f[j] * c[j] + i[j] * g[j] for j in range(n)]
    h = [o[j] * math.tanh(c[j]) for j in range(n)]
    return h, c


def lstm_predict(X, p):
    n = len(p["b"]) // 4
    h, c = [0.0] * n, [0.0] * n
    for x_t in X:
        h, c = lstm_cell(x_t, h, c, p)
    return _vadd(naive_matvec(p["head_w"], h), p["head_b"])


def predict(X, p, variant):
    p = {k: np.asarray(v).tolist() for k, v in p.items()}
    X = np.asarray(X).tolist()
    if variant == "rnn":
        return rnn_predict(X, p)
    if variant == "lstm":
        return lstm_predict(X, p)
    return lavarnet_predict(X, p, variant)


def knn_brute(query, windows, targets, k):
    q = np.asarray(query).reshape(-1).tolist()
    dist = []
    for idx, w in enumerate(np.asarray(windows)):
        flat = w.reshape(-1).tolist()
        d = 0.0
        for a, b in zip(flat, q):
            d += (a - b) * (a - b)
        dist.append((d, idx))
    dist.sort()
    chosen = [idx for _, idx in dist[:k]]
    total = np.array(targets[chosen[0]], dtype=float)
    for idx in chosen[1:]:
        total = total + targets[idx]
    return total / k


def reference_adam(x0, grad_fn, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar-by-scalar Adam, returning the whole trajectory."""
    x = [float(v) for v in x0]
    m = [0.0] * len(x)
    v = [0.0] * len(x)
    traj = []
    for t in range(1, steps + 1):
        g = grad_fn(x)
        for i in range(len(x)):
            m[i] = b1 * m[i] + (1 - b1) * g[i]
            v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i]
            mhat = m[i] / (1 - b1 ** t)
            vhat = v[i] / (1 - b2 ** t)
            x[i] = x[i] - lr * mhat / (math.sqrt(vhat) + eps)
        traj.append(list(x))
    return traj


def central_difference(f, params: dict, step=1e-5):
    """Central finite-difference gradient of scalar f(params) for every entry."""
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][idx] += step
            minus[name][idx] -= step
            g[idx] = (f(plus) - f(minus)) / (2 * step)
        grads[name] = g
    return grads


def relative_error(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def read_grid(name):
    """Rows of a lag-by-variable fixture table as {lag: [values...]}."""
    with (FIXTURES / name).open() as fh:
        rows = list(csv.DictReader(fh))
    return {int(r["lag"]): [float(r[f"v{k}"]) for k in range(1, 7)] for r in rows}


def published_window_matrix():
    """Published A_1 weights laid out as window rows (oldest first): row t holds lag T - t + 1."""
    by_lag = read_grid("published_weights.csv")
    T = len(by_lag)
    return np.array([by_lag[T - t + 1] for t in range(1, T + 1)])


def published_truth_edges():
    by_lag = read_grid("published_truth.csv")
    return {(k + 1, lag, 1) for lag, row in by_lag.items() for k, v in enumerate(row) if v == 1}
