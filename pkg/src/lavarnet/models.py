"""Lagged-variable representation networks and the RNN/LSTM/KNN baselines.

Every network maps a window ``X`` of shape (T, K) (or a batch (B, T, K)) to
``K_out`` forecasts of the next step.  LAVARNET builds one hidden state per
(time step, variable) pair::

    h[t,k] = sigmoid(W_T x[t,:] + W_V x[:,k] (+ recurrence) + b_h)
    y[t,k] = sigmoid(W_y h[t,k] + b_y)

and target ``i`` is read out by an affine head applied to the concatenation
of ``A_i[t,k] * y[t,k]`` in t-major, k-minor order.  The recurrence term is
absent (``lavarnet``), ``U_h h[t-1,k]`` (``rlavarnet``) or
``U_tilde h[t-1,:]`` over all variables (``frlavarnet``); the state before
the first step is zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

from . import kernels
from . import tensor as te
from .tensor import ContractError, DimensionError

LAVARNET_VARIANTS = ("lavarnet", "rlavarnet", "frlavarnet")
NEURAL_VARIANTS = LAVARNET_VARIANTS + ("rnn", "lstm")
VARIANTS = NEURAL_VARIANTS + ("knn",)

# LSTM gate blocks are stacked in this order along the first axis of W, U, b.
LSTM_GATES = ("input", "forget", "candidate", "output")


def param_shapes(variant: str, n: int, T: int, K: int, K_out: int) -> dict[str, tuple[int, ...]]:
    if variant in LAVARNET_VARIANTS:
        shapes = {"W_T": (n, K), "W_V": (n, T)}
        if variant == "rlavarnet":
            shapes["U_h"] = (n, n)
        elif variant == "frlavarnet":
            shapes["U_tilde"] = (n, n * K)
        shapes.update({
            "b_h": (n,),
            "W_y": (n, n),
            "b_y": (n,),
            "A": (K_out, T, K),
            "head_w": (K_out, T * K * n),
            "head_b": (K_out,),
        })
        return shapes
    if variant == "rnn":
        return {
            "W_h": (n, K), "U_h": (n, n), "b_h": (n,),
            "W_y": (n, n), "b_y": (n,),
            "head_w": (K_out, n), "head_b": (K_out,),
        }
    if variant == "lstm":
        return {
            "W": (4 * n, K), "U": (4 * n, n), "b": (4 * n,),
            "head_w": (K_out, n), "head_b": (K_out,),
        }
    raise ContractError(f"unknown variant {variant!r}; expected one of {NEURAL_VARIANTS}")


def param_count(variant: str, n: int, T: int, K: int, K_out: int) -> int:
    """Exact number of trainable scalars of a network variant."""
    if min(n, T, K, K_out) < 1:
        raise ContractError("all dimensions must be positive")
    count = n * K + n * T + n + n * n + n + K_out * T * K + K_out * (T * K * n + 1)
    if variant == "lavarnet":
        return count
    if variant == "rlavarnet":
        return count + n * n
    if variant == "frlavarnet":
        return count + n * n * K
    return sum(int(np.prod(s)) for s in param_shapes(variant, n, T, K, K_out).values())


def _fan_in(name: str, shape: tuple[int, ...]) -> int:
    # Weight matrices act on their last axis.
    return shape[-1]


@dataclass(frozen=True)
class ModelParams:
    variant: str
    n: int
    T: int
    K: int
    K_out: int
    tensors: Mapping[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        expected = param_shapes(self.variant, self.n, self.T, self.K, self.K_out)
        if set(expected) != set(self.tensors):
            raise ContractError(
                f"{self.variant} expects tensors {sorted(expected)}, got {sorted(self.tensors)}"
            )
        frozen = {}
        for name, shape in expected.items():
            arr = np.array(self.tensors[name], dtype=np.float64)
            if arr.shape != shape:
                raise DimensionError(f"{name}: expected shape {shape}, got {arr.shape}")
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "tensors", MappingProxyType(frozen))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.n, self.T, self.K, self.K_out

    def replace(self, **updates: np.ndarray) -> "ModelParams":
        tensors = dict(self.tensors)
        tensors.update(updates)
        return ModelParams(self.variant, self.n, self.T, self.K, self.K_out, tensors)

    def size(self) -> int:
        return sum(a.size for a in self.tensors.values())


def init_params(variant: str, n: int, T: int, K: int, K_out: int, seed: int) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, A ~ U(-0.1, 0.1).

    The LSTM forget-gate bias is the one exception and starts at 1.
    """
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in param_shapes(variant, n, T, K, K_out).items():
        if name == "A":
            tensors[name] = rng.uniform(-0.1, 0.1, size=shape)
        elif len(shape) == 1:
            tensors[name] = np.zeros(shape)
        else:
            s = 1.0 / np.sqrt(_fan_in(name, shape))
            tensors[name] = rng.uniform(-s, s, size=shape)
    if variant == "lstm":
        tensors["b"][n:2 * n] = 1.0
    return ModelParams(variant, n, T, K, K_out, tensors)


# --- single-window reference operations (1-based t, k) ----------------------


def _sig(v):
    return te.sigmoid(te.Tape().const(v)).value


def _check_tk(X: np.ndarray, t: int, k: int) -> None:
    T, K = X.shape
    if not (1 <= t <= T and 1 <= k <= K):
        raise ContractError(f"(t={t}, k={k}) outside window of {T} steps x {K} variables")


def lavarnet_hidden(X: np.ndarray, t: int, k: int, params: ModelParams) -> np.ndarray:
    _check_tk(X, t, k)
    return _sig(params["W_T"] @ X[t - 1] + params["W_V"] @ X[:, k - 1] + params["b_h"])


def rlavarnet_hidden(X, t, k, params: ModelParams, h_prev_k: np.ndarray) -> np.ndarray:
    _check_tk(X, t, k)
    pre = params["W_T"] @ X[t - 1] + params["W_V"] @ X[:, k - 1] + params["U_h"] @ h_prev_k
    return _sig(pre + params["b_h"])


def frlavarnet_hidden(X, t, k, params: ModelParams, h_prev_all: np.ndarray) -> np.ndarray:
    _check_tk(X, t, k)
    pre = params["W_T"] @ X[t - 1] + params["W_V"] @ X[:, k - 1] + params["U_tilde"] @ h_prev_all
    return _sig(pre + params["b_h"])


def output_vector(h: np.ndarray, params: ModelParams) -> np.ndarray:
    return _sig(params["W_y"] @ h + params["b_y"])


def elman_step(x_t: np.ndarray, h_prev: np.ndarray, params: ModelParams):
    h = _sig(params["W_h"] @ x_t + params["U_h"] @ h_prev + params["b_h"])
    return h, _sig(params["W_y"] @ h + params["b_y"])


def lstm_step(x_t: np.ndarray, state: tuple[np.ndarray, np.ndarray], params: ModelParams):
    """One standard LSTM update; ``state`` and the result are ``(h, c)``."""
    h_prev, c_prev = state
    n = h_prev.shape[0]
    z = params["W"] @ x_t + params["U"] @ h_prev + params["b"]
    i, f, g, o = _sig(z[:n]), _sig(z[n:2 * n]), np.tanh(z[2 * n:3 * n]), _sig(z[3 * n:])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def hidden_grid(X: np.ndarray, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """All h[t,k] and y[t,k] of one window, arrays of shape (T, K, n)."""
    T, K = X.shape
    n = params.n
    h = np.zeros((T, K, n))
    for t in range(1, T + 1):
        for k in range(1, K + 1):
            if params.variant == "lavarnet":
                h[t - 1, k - 1] = lavarnet_hidden(X, t, k, params)
            elif params.variant == "rlavarnet":
                prev = h[t - 2, k - 1] if t > 1 else np.zeros(n)
                h[t - 1, k - 1] = rlavarnet_hidden(X, t, k, params, prev)
            else:
                prev = h[t - 2].reshape(-1) if t > 1 else np.zeros(n * K)
                h[t - 1, k - 1] = frlavarnet_hidden(X, t, k, params, prev)
    y = np.stack([[output_vector(h[t, k], params) for k in range(K)] for t in range(T)])
    return h, y


# --- batched forward on the tape ----------------------------------------------


def bind(tape: te.Tape, params: ModelParams, trainable: bool = True) -> dict[str, te.Node]:
    if trainable:
        return {name: tape.param(name, value) for name, value in params.tensors.items()}
    return {name: tape.const(value) for name, value in params.tensors.items()}


def forward(tape: te.Tape, p: Mapping[str, te.Node], X: np.ndarray, variant: str,
            dims: tuple[int, int, int, int]) -> te.Node:
    """Record the forward pass of a batch ``X`` (B, T, K); returns (B, K_out)."""
    n, T, K, K_out = dims
    if X.ndim != 3 or X.shape[1:] != (T, K):
        raise DimensionError(f"expected windows of shape (B, {T}, {K}), got {X.shape}")
    B = X.shape[0]
    if variant in LAVARNET_VARIANTS:
        by_step = te.linear(tape.const(X), p["W_T"])                          # (B, T, n)
        by_var = te.linear(tape.const(X.transpose(0, 2, 1)), p["W_V"])        # (B, K, n)
        base = te.reshape(by_step, (B, T, 1, n)) + te.reshape(by_var, (B, 1, K, n)) + p["b_h"]
        if variant == "lavarnet":
            h = te.sigmoid(base)
        else:
            steps = []
            h_prev = None
            for t in range(T):
                pre = base[:, t]                                              # (B, K, n)
                if h_prev is not None:
                    if variant == "rlavarnet":
                        pre = pre + te.linear(h_prev, p["U_h"])
                    else:
                        flat = te.reshape(h_prev, (B, K * n))
                        pre = pre + te.reshape(te.linear(flat, p["U_tilde"]), (B, 1, n))
                h_prev = te.sigmoid(pre)
                steps.append(h_prev)
            h = te.stack(steps, axis=1)
        y = te.sigmoid(te.linear(h, p["W_y"]) + p["b_y"])                     # (B, T, K, n)
        scaled = te.reshape(y, (B, 1, T, K, n)) * te.reshape(p["A"], (1, K_out, T, K, 1))
        flat = te.reshape(scaled, (B, K_out, T * K * n))
        return te.sum_axis(flat * p["head_w"], axis=-1) + p["head_b"]
    if variant == "rnn":
        h = None
        for t in range(T):
            pre = te.linear(tape.const(X[:, t]), p["W_h"]) + p["b_h"]
            if h is not None:
                pre = pre + te.linear(h, p["U_h"])
            h = te.sigmoid(pre)
        y = te.sigmoid(te.linear(h, p["W_y"]) + p["b_y"])
        return te.linear(y, p["head_w"]) + p["head_b"]
    if variant == "lstm":
        h = c = None
        for t in range(T):
            z = te.linear(tape.const(X[:, t]), p["W"]) + p["b"]
            if h is not None:
                z = z + te.linear(h, p["U"])
            i = te.sigmoid(z[:, :n])
            f = te.sigmoid(z[:, n:2 * n])
            g = te.tanh(z[:, 2 * n:3 * n])
            o = te.sigmoid(z[:, 3 * n:])
            c = i * g if c is None else f * c + i * g
            h = o * te.tanh(c)
        return te.linear(h, p["head_w"]) + p["head_b"]
    raise ContractError(f"unknown variant {variant!r}")


def predict(X: np.ndarray, params: ModelParams, variant: str | None = None) -> np.ndarray:
    """Forecasts for one window (T, K) -> (K_out,) or a batch (B, T, K) -> (B, K_out)."""
    if variant is not None and variant != params.variant:
        raise ContractError(f"params are for {params.variant!r}, not {variant!r}")
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    batch = X[None] if single else X
    tape = te.Tape()
    out = forward(tape, bind(tape, params, trainable=False), batch, params.variant, params.dims).value
    return out[0] if single else out


def loss_and_grads(params: ModelParams, X: np.ndarray, Y: np.ndarray) -> tuple[float, dict[str, np.ndarray], int]:
    """MSE of a batch and its gradients; also returns the registered slot count."""
    tape = te.Tape()
    nodes = bind(tape, params)
    loss = te.mse(forward(tape, nodes, X, params.variant, params.dims), Y)
    return float(loss.value), te.backward(tape, loss), tape.grad_slots()


# --- KNN ---------------------------------------------------------------------


def knn_predict(X_query: np.ndarray, train_windows: np.ndarray, train_targets: np.ndarray,
                k_neighbors: int = 5) -> np.ndarray:
    """Mean target of the nearest training windows (Euclidean, flattened).

    Neighbors are ranked by (distance, training index).  Accepts one query
    window or a batch of them.
    """
    train_windows = np.asarray(train_windows, dtype=np.float64)
    if train_windows.shape[0] == 0:
        raise ContractError("KNN needs a non-empty training set")
    if train_windows.shape[0] < k_neighbors:
        raise ContractError(
            f"k_neighbors={k_neighbors} exceeds training-set size {train_windows.shape[0]}"
        )
    X_query = np.asarray(X_query, dtype=np.float64)
    single = X_query.ndim == train_windows.ndim - 1
    queries = X_query[None] if single else X_query
    flat_train = np.ascontiguousarray(train_windows.reshape(train_windows.shape[0], -1))
    flat_q = np.ascontiguousarray(queries.reshape(queries.shape[0], -1))
    if flat_q.shape[1] != flat_train.shape[1]:
        raise DimensionError(f"query windows {X_query.shape} do not match training windows {train_windows.shape}")
    idx = kernels.knn_indices(flat_q, flat_train, k_neighbors)
    targets = np.asarray(train_targets, dtype=np.float64).reshape(train_windows.shape[0], -1)
    out = np.empty((flat_q.shape[0], targets.shape[1]))
    for q in range(flat_q.shape[0]):
        total = targets[idx[q, 0]].copy()
        for j in range(1, k_neighbors):
            total += targets[idx[q, j]]
        out[q] = total / k_neighbors
    return out[0] if single else out


# --- checkpoint files ------------------------------------------------------------

CHECKPOINT_FORMAT = "lavarnet-checkpoint/1"


def checkpoint_doc(params: ModelParams) -> dict:
    # json writes floats with repr(), which round-trips every float64 exactly
    return {
        "format": CHECKPOINT_FORMAT,
        "variant": params.variant,
        "dims": {"n": params.n, "T": params.T, "K": params.K, "K_out": params.K_out},
        "tensors": [
            {"name": name, "shape": list(arr.shape), "values": arr.reshape(-1).tolist()}
            for name, arr in params.tensors.items()
        ],
    }


def params_from_doc(doc: dict) -> ModelParams:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ContractError(f"unsupported checkpoint format {doc.get('format')!r}")
    d = doc["dims"]
    tensors = {}
    for entry in doc["tensors"]:
        shape = tuple(entry["shape"])
        values = np.array(entry["values"], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise DimensionError(f"{entry['name']}: {values.size} values for shape {shape}")
        tensors[entry["name"]] = values.reshape(shape)
    return ModelParams(doc["variant"], d["n"], d["T"], d["K"], d["K_out"], tensors)


def save_checkpoint(params: ModelParams, path) -> None:
    Path(path).write_text(json.dumps(checkpoint_doc(params), indent=1) + "\n")


def load_checkpoint(path) -> ModelParams:
    return params_from_doc(json.loads(Path(path).read_text()))
