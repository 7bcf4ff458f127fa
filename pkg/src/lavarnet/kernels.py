"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``LAVARNET_PURE_PYTHON=1``
to force the numpy fallback.  ``BACKEND`` names the active one.
"""

import os

from . import _kernels_py

if os.environ.get("LAVARNET_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

henon_chain = _impl.henon_chain
var_simulate = _impl.var_simulate
knn_indices = _impl.knn_indices

__all__ = ["BACKEND", "henon_chain", "var_simulate", "knn_indices"]
