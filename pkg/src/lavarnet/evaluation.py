"""Forecast error and recovery scores for the learned lagged-variable weights.

A LAVARNET weight matrix ``A_k`` has one row per window step, oldest first.
Row ``t`` (1-based) of a window of length ``T`` holds lag ``T - t + 1``
relative to the forecast step; every function here converts to
(variable, lag) pairs before comparing with a :class:`CouplingNetwork`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datagen import CouplingNetwork
from .tensor import ContractError

REPORT_FORMAT = "lavarnet-report/1"


def mae(preds, actuals) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    actuals = np.asarray(actuals, dtype=np.float64)
    if preds.shape != actuals.shape:
        raise ContractError(f"mae: shapes {preds.shape} and {actuals.shape} differ")
    if preds.shape[0] < 1:
        raise ContractError("mae needs at least one sample")
    return float(np.mean(np.abs(preds - actuals)))


def mae_per_target(preds, actuals) -> np.ndarray:
    """Column-wise MAE of (N, K_out) arrays."""
    preds = np.asarray(preds, dtype=np.float64)
    actuals = np.asarray(actuals, dtype=np.float64)
    if preds.shape != actuals.shape:
        raise ContractError(f"mae: shapes {preds.shape} and {actuals.shape} differ")
    return np.mean(np.abs(preds - actuals), axis=0)


def top_lagged_set(A_k: np.ndarray, c: int) -> list[tuple[int, int]]:
    """The ``c`` cells (t, k), 1-based, with the largest |weight|.

    Ties go to the smaller row, then the smaller column.
    """
    A_k = np.asarray(A_k, dtype=np.float64)
    T, K = A_k.shape
    if not 1 <= c <= T * K:
        raise ContractError(f"cardinality {c} outside 1..{T * K}")
    flat = np.abs(A_k).reshape(-1)
    order = np.argsort(-flat, kind="stable")[:c]
    return [(int(i // K) + 1, int(i % K) + 1) for i in order]


def row_to_lag(t: int, T: int) -> int:
    return T - t + 1


def estimated_lagged_set(A_k: np.ndarray, c: int) -> set[tuple[int, int]]:
    """Top-``c`` cells of ``A_k`` as (variable, lag) pairs."""
    T = np.shape(A_k)[0]
    return {(k, row_to_lag(t, T)) for t, k in top_lagged_set(A_k, c)}


def _targets(truth: CouplingNetwork, A: Sequence[np.ndarray], targets) -> list[int]:
    targets = list(range(1, truth.K + 1)) if targets is None else [int(k) for k in targets]
    if len(A) != len(targets):
        raise ContractError(f"{len(A)} weight matrices for {len(targets)} targets")
    for k in targets:
        if not 1 <= k <= truth.K:
            raise ContractError(f"target {k} outside 1..{truth.K}")
        if not truth.lagged_drivers(k):
            raise ContractError(f"target {k} has no ground-truth drivers")
    return targets


def _counts(truth: CouplingNetwork, k: int, A_k: np.ndarray) -> tuple[int, int, int, int]:
    """(|L_k & est|, |L_k|, |V_k & est vars|, |V_k|) for one target."""
    L_k = truth.lagged_drivers(k)
    V_k = truth.drivers(k)
    # when the window is shorter than the true order, the ranking is capped at T*K cells
    est = estimated_lagged_set(A_k, min(len(L_k), np.size(A_k)))
    return len(L_k & est), len(L_k), len(V_k & {j for j, _ in est}), len(V_k)


def _all_counts(truth, A, targets):
    return [_counts(truth, k, A_k) for k, A_k in zip(_targets(truth, A, targets), A)]


def score_RL(truth: CouplingNetwork, A: Sequence[np.ndarray], targets: Sequence[int] | None = None) -> float:
    """Fraction of true driving lagged variables found among the top-|L_k| weights.

    ``A[i]`` belongs to target variable ``targets[i]`` (1-based); by default
    the matrices cover variables 1..K in order.
    """
    counts = _all_counts(truth, A, targets)
    return sum(c[0] for c in counts) / sum(c[1] for c in counts)


def score_RV(truth: CouplingNetwork, A: Sequence[np.ndarray], targets: Sequence[int] | None = None) -> float:
    counts = _all_counts(truth, A, targets)
    return sum(c[2] for c in counts) / sum(c[3] for c in counts)


def per_target_scores(truth: CouplingNetwork, A: Sequence[np.ndarray],
                      targets: Sequence[int] | None = None) -> tuple[list, list]:
    counts = _all_counts(truth, A, targets)
    return [c[0] / c[1] for c in counts], [c[2] / c[3] for c in counts]


@dataclass
class EvalReport:
    targets: list
    mae_norm: list
    mae_orig: list
    A: list | None = None
    r_l: float | None = None
    r_v: float | None = None
    r_l_per_target: list | None = None
    r_v_per_target: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.targets:
            raise ContractError("report needs at least one target")
        if not len(self.targets) == len(self.mae_norm) == len(self.mae_orig):
            raise ContractError("per-target columns have different lengths")
        if any(m < 0 for m in list(self.mae_norm) + list(self.mae_orig)):
            raise ContractError("MAE values must be non-negative")
        for r in (self.r_l, self.r_v):
            if r is not None and not 0.0 <= r <= 1.0:
                raise ContractError(f"recovery score {r} outside [0, 1]")

    @property
    def mean_mae_orig(self) -> float:
        return float(np.mean(self.mae_orig))

    @property
    def mean_mae_norm(self) -> float:
        return float(np.mean(self.mae_norm))

    def to_json(self) -> dict:
        doc = {
            "format": REPORT_FORMAT,
            "meta": dict(sorted(self.meta.items())),
            "targets": list(self.targets),
            "mae_norm": [float(v) for v in self.mae_norm],
            "mae_orig": [float(v) for v in self.mae_orig],
            "mean_mae_norm": self.mean_mae_norm,
            "mean_mae_orig": self.mean_mae_orig,
        }
        if self.r_l is not None:
            doc["r_l"] = float(self.r_l)
            doc["r_v"] = float(self.r_v)
            doc["r_l_per_target"] = [float(v) for v in self.r_l_per_target]
            doc["r_v_per_target"] = [float(v) for v in self.r_v_per_target]
        if self.A is not None:
            doc["A"] = [np.asarray(a, dtype=float).tolist() for a in self.A]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "EvalReport":
        if doc.get("format") != REPORT_FORMAT:
            raise ContractError(f"unsupported report format {doc.get('format')!r}")
        return cls(
            targets=doc["targets"], mae_norm=doc["mae_norm"], mae_orig=doc["mae_orig"],
            A=[np.array(a) for a in doc["A"]] if "A" in doc else None,
            r_l=doc.get("r_l"), r_v=doc.get("r_v"),
            r_l_per_target=doc.get("r_l_per_target"), r_v_per_target=doc.get("r_v_per_target"),
            meta=doc.get("meta", {}),
        )


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def emit_report(report: EvalReport, path) -> tuple[Path, Path]:
    """Write ``<path>.json`` and ``<path>.csv``; returns both paths."""
    base = Path(path)
    if base.suffix in (".json", ".csv"):
        base = base.with_suffix("")
    json_path, csv_path = base.with_suffix(".json"), base.with_suffix(".csv")
    json_path.write_text(json.dumps(report.to_json(), indent=2, allow_nan=False) + "\n")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target", "mae_norm", "mae_orig", "r_l", "r_v"])
        for i, name in enumerate(report.targets):
            r_l = report.r_l_per_target[i] if report.r_l_per_target else None
            r_v = report.r_v_per_target[i] if report.r_v_per_target else None
            w.writerow([name, _fmt(report.mae_norm[i]), _fmt(report.mae_orig[i]), _fmt(r_l), _fmt(r_v)])
    return json_path, csv_path


def load_report(path) -> EvalReport:
    return EvalReport.from_json(json.loads(Path(path).with_suffix(".json").read_text()))


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation."""
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
