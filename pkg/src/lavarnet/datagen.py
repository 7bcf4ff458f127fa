"""Synthetic multivariate series with known coupling structure.

Variables and lags are 1-based throughout, matching how coupling structures
are usually written: ``(j, tau, k)`` means variable ``j`` at lag ``tau``
drives variable ``k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CouplingNetwork:
    K: int
    P: int
    lagged_edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        edges = frozenset((int(j), int(tau), int(k)) for j, tau, k in self.lagged_edges)
        for j, tau, k in edges:
            if not (1 <= j <= self.K and 1 <= k <= self.K and 1 <= tau <= self.P):
                raise ValueError(f"edge {(j, tau, k)} outside K={self.K}, P={self.P}")
        object.__setattr__(self, "lagged_edges", edges)

    def lagged_drivers(self, k: int) -> frozenset:
        """L_k as a set of (variable, lag) pairs."""
        return frozenset((j, tau) for j, tau, tgt in self.lagged_edges if tgt == k)

    def drivers(self, k: int) -> frozenset:
        """V_k: the variables appearing in L_k."""
        return frozenset(j for j, _ in self.lagged_drivers(k))

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "P": self.P,
            "lagged_edges": [
                {"source": j, "lag": tau, "target": k} for j, tau, k in sorted(self.lagged_edges)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CouplingNetwork":
        edges = [(e["source"], e["lag"], e["target"]) for e in doc["lagged_edges"]]
        return cls(int(doc["K"]), int(doc["P"]), frozenset(edges))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "CouplingNetwork":
        return cls.from_json(json.loads(Path(path).read_text()))


def gen_er_network(K: int, P: int, density: float = 0.4, seed: int = 0) -> CouplingNetwork:
    """Erdős–Rényi driving structure: self-edges always, off-diagonal pairs with
    probability ``density``; every included pair carries all lags 1..P."""
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    rng = np.random.default_rng(seed)
    draws = rng.random((K, K))  # draws[k, j]: does j drive k
    edges = set()
    for k in range(K):
        for j in range(K):
            if j == k or draws[k, j] < density:
                edges.update((j + 1, tau, k + 1) for tau in range(1, P + 1))
    return CouplingNetwork(K, P, frozenset(edges))


def companion_radius(coefs: np.ndarray) -> float:
    P, K, _ = coefs.shape
    comp = np.zeros((K * P, K * P))
    comp[:K] = np.concatenate(list(coefs), axis=1)
    comp[K:, :-K] = np.eye(K * (P - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def draw_var_coefficients(network: CouplingNetwork, seed: int = 0, max_radius: float = 0.95) -> np.ndarray:
    """Coefficient stack (P, K, K) supported on the network's edges.

    Entries are U(-1, 1); the whole stack is shrunk by a common factor until
    the companion matrix has spectral radius <= ``max_radius``.  An all-zero
    draw is replaced by a fresh draw from the next sub-seed.
    """
    K, P = network.K, network.P
    mask = np.zeros((P, K, K), dtype=bool)
    for j, tau, k in network.lagged_edges:
        mask[tau - 1, k - 1, j - 1] = True
    if not mask.any():
        return np.zeros((P, K, K))
    for sub in range(1000):
        rng = np.random.default_rng([seed, sub])
        coefs = np.where(mask, rng.uniform(-1.0, 1.0, size=(P, K, K)), 0.0)
        if np.any(coefs != 0.0):
            break
    else:
        raise GenerationError(f"seed {seed}: every coefficient draw was all-zero")
    radius = companion_radius(coefs)
    for _ in range(10_000):
        if radius <= max_radius:
            return coefs
        coefs = coefs * min(max_radius / radius, 0.99)
        radius = companion_radius(coefs)
    raise GenerationError(f"seed {seed}: could not bring companion radius below {max_radius}")


def simulate_var(coefs: np.ndarray, L: int, noise_std: float = 1.0, burn_in: int = 1000,
                 seed: int = 0, init: np.ndarray | None = None) -> np.ndarray:
    """Simulate x[t] = sum_tau coefs[tau-1] x[t-tau] + N(0, noise_std^2) noise.

    ``init`` gives the P rows before the first step (oldest first); zero by
    default.  The first ``burn_in`` simulated rows are discarded.
    """
    coefs = np.asarray(coefs, dtype=np.float64)
    P, K, _ = coefs.shape
    rng = np.random.default_rng(seed)
    noise = noise_std * rng.standard_normal((burn_in + L, K))
    start = np.zeros((P, K)) if init is None else np.asarray(init, dtype=np.float64).reshape(P, K)
    return kernels.var_simulate(coefs, noise, start)[burn_in:]


def gen_var(network: CouplingNetwork, L: int, burn_in: int = 1000, seed: int = 0,
            noise_std: float = 1.0) -> np.ndarray:
    coefs = draw_var_coefficients(network, seed=seed)
    return simulate_var(coefs, L, noise_std=noise_std, burn_in=burn_in, seed=seed + 7_919)


def henon_network(K: int) -> CouplingNetwork:
    """Chain truth: self lags 1 and 2, each neighbor at lag 1."""
    edges = set()
    for k in range(1, K + 1):
        edges.update({(k, 1, k), (k, 2, k)})
        for nb in (k - 1, k + 1):
            if 1 <= nb <= K:
                edges.add((nb, 1, k))
    return CouplingNetwork(K, 2, frozenset(edges))


def henon_iterate(history: np.ndarray, steps: int, coupling: float = 0.3) -> np.ndarray:
    """Deterministic chain iteration from given (x[t-2], x[t-1]) rows; may diverge."""
    out, valid = kernels.henon_chain(np.asarray(history, dtype=np.float64), steps, coupling, np.inf)
    return out


def gen_henon_chain(K: int, L: int, coupling: float = 0.3, burn_in: int = 1000,
                    seed: int = 0, max_attempts: int = 100) -> tuple[np.ndarray, CouplingNetwork]:
    """Chain-coupled Hénon maps, redrawing initial conditions on divergence."""
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        history = rng.uniform(-0.5, 0.5, size=(2, K))
        out, valid = kernels.henon_chain(history, burn_in + L, coupling, 10.0)
        if valid == burn_in + L:
            return out[burn_in:], henon_network(K)
    raise GenerationError(
        f"seed {seed}: {max_attempts} consecutive initial conditions diverged (K={K}, coupling={coupling})"
    )
