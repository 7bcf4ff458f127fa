"""Loss, optimizer, learning-rate schedule and the training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import models
from .dataio import Windows
from .models import ModelParams
from .tensor import ContractError, DimensionError

log = logging.getLogger(__name__)


class TrainingAborted(RuntimeError):
    pass


def mse_loss(pred, actual) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape:
        raise DimensionError(f"mse_loss: lengths {pred.shape} and {actual.shape} differ")
    diff = pred - actual
    return float(np.mean(diff * diff))


def cosine_lr(i: float, E: int, eta_min: float = 1e-4, eta_max: float = 1e-2) -> float:
    return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + math.cos(i * math.pi / E))


@dataclass(frozen=True)
class AdamState:
    m: Mapping[str, np.ndarray]
    v: Mapping[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in params.items()},
                   {k: np.zeros_like(a) for k, a in params.items()}, 0)


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update; returns new ``(params, state)`` without mutating inputs."""
    t = state.step + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise DimensionError(f"gradient for {k!r} has shape {g.shape}, parameter {p.shape}")
        m = beta1 * state.m[k] + (1.0 - beta1) * g
        v = beta2 * state.v[k] + (1.0 - beta2) * (g * g)
        new_p[k] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        new_m[k], new_v[k] = m, v
    return new_p, AdamState(new_m, new_v, t)


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "lavarnet"
    n: int = 20
    epochs: int = 70
    batch_size: int = 64
    schedule: str = "cosine"        # "cosine" or "constant"
    eta_max: float = 0.01
    eta_min: float = 0.0001
    lr_constant: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0
    grid: tuple = ()

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ContractError(f"batch size must be >= 1, got {self.batch_size}")
        if not 0 < self.eta_min <= self.eta_max:
            raise ContractError(f"need 0 < eta_min <= eta_max, got {self.eta_min}, {self.eta_max}")
        if self.schedule not in ("cosine", "constant"):
            raise ContractError(f"unknown schedule {self.schedule!r}")

    def lr(self, epoch: int) -> float:
        if self.schedule == "constant":
            return self.lr_constant
        return cosine_lr(epoch, self.epochs, self.eta_min, self.eta_max)


def default_config(variant: str, **overrides) -> TrainConfig:
    """Cosine annealing for the LAVARNET family, constant 1e-3 for RNN/LSTM."""
    schedule = "cosine" if variant in models.LAVARNET_VARIANTS else "constant"
    return TrainConfig(variant=variant, schedule=overrides.pop("schedule", schedule), **overrides)


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = -1
    best_params: ModelParams | None = None
    config: TrainConfig | None = None

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch] if self.best_epoch >= 0 else math.inf

    def rows(self):
        for e, (tr, va, lr) in enumerate(zip(self.train_loss, self.val_loss, self.lr)):
            yield e, tr, va, lr


def evaluate_loss(params: ModelParams, windows: Windows, batch: int = 1024) -> float:
    total = 0.0
    for s in range(0, len(windows.X), batch):
        pred = models.predict(windows.X[s:s + batch], params)
        diff = pred - windows.Y[s:s + batch]
        total += float(np.sum(diff * diff))
    return total / windows.Y.size


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch])


def train(train_w: Windows, val_w: Windows, config: TrainConfig,
          init: ModelParams | None = None) -> TrainHistory:
    """Minibatch Adam with per-epoch shuffling and best-validation checkpointing."""
    if config.variant not in models.NEURAL_VARIANTS:
        raise ContractError(f"cannot train variant {config.variant!r}")
    _, T, K = train_w.X.shape
    K_out = train_w.Y.shape[1]
    params = init or models.init_params(config.variant, config.n, T, K, K_out, config.seed)
    tensors = dict(params.tensors)
    state = AdamState.zeros_like(tensors)
    history = TrainHistory(config=config)
    N = len(train_w.X)
    for epoch in range(config.epochs):
        lr = config.lr(epoch)
        order = epoch_rng(config.seed, epoch).permutation(N)
        seen = 0.0
        for b, s in enumerate(range(0, N, config.batch_size)):
            idx = order[s:s + config.batch_size]
            current = params.replace(**tensors)
            loss, grads, _ = models.loss_and_grads(current, train_w.X[idx], train_w.Y[idx])
            if not math.isfinite(loss):
                raise TrainingAborted(f"{config.variant}: non-finite loss at epoch {epoch}, batch {b}")
            seen += loss * len(idx)
            tensors, state = adam_step(tensors, grads, state, lr, config.beta1, config.beta2, config.eps_adam)
        params = params.replace(**tensors)
        val = evaluate_loss(params, val_w)
        if not math.isfinite(val):
            raise TrainingAborted(f"{config.variant}: non-finite validation loss at epoch {epoch}")
        history.train_loss.append(seen / N)
        history.val_loss.append(val)
        history.lr.append(lr)
        if val < history.best_val_loss:
            history.best_epoch = epoch
            history.best_params = params
        log.debug("%s epoch %d train %.6g val %.6g lr %.3g", config.variant, epoch, seen / N, val, lr)
    return history


def grid_seed(base: int, n: int) -> int:
    return int(np.random.SeedSequence([base, n]).generate_state(1)[0])


def select_best(histories: Sequence[TrainHistory]) -> TrainHistory:
    """Lowest best-validation loss; ties go to the smaller neuron count."""
    return min(histories, key=lambda h: (h.best_val_loss, h.config.n))


def grid_search(train_w: Windows, val_w: Windows, config: TrainConfig,
                trainer: Callable[..., TrainHistory] = train) -> TrainHistory:
    candidates = tuple(config.grid) or (config.n,)
    if len(candidates) == 1:
        return trainer(train_w, val_w, replace(config, n=candidates[0], grid=()))
    runs = [trainer(train_w, val_w, replace(config, n=n, seed=grid_seed(config.seed, n), grid=()))
            for n in candidates]
    return select_best(runs)
