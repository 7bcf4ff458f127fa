"""Lagged-variable representation networks for multivariate forecasting."""

from .kernels import BACKEND
from .models import (
    ModelParams,
    init_params,
    knn_predict,
    load_checkpoint,
    param_count,
    predict,
    save_checkpoint,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ModelParams",
    "init_params",
    "knn_predict",
    "load_checkpoint",
    "param_count",
    "predict",
    "save_checkpoint",
]
