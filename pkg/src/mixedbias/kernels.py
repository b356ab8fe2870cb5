"""Backend selection for the numerical kernels.

The compiled extension ``mixedbias._kernels`` is used when it imports;
otherwise the pure-Python module is used. Setting the environment variable
``MIXEDBIAS_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("MIXEDBIAS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

compensated_mean = _impl.compensated_mean
compensated_colmeans = _impl.compensated_colmeans
weighted_gram_mean = _impl.weighted_gram_mean
lasso_cd = _impl.lasso_cd

__all__ = [
    "BACKEND",
    "compensated_mean",
    "compensated_colmeans",
    "weighted_gram_mean",
    "lasso_cd",
]
