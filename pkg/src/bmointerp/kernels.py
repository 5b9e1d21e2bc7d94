"""Backend selection for the cube-scan kernels.

The compiled extension ``bmointerp._core`` is used when importable; otherwise
the numpy implementation in ``bmointerp._fallback`` is.  Setting
``BMOINTERP_PURE_PYTHON=1`` forces the fallback.
"""
import os
from types import ModuleType

import numpy as np

from bmointerp import _fallback


def _load_compiled() -> ModuleType | None:
    try:
        from bmointerp import _core
    except ImportError:
        return None
    return _core


_compiled = _load_compiled()

if _compiled is not None and os.environ.get("BMOINTERP_PURE_PYTHON", "") in ("", "0"):
    impl: ModuleType = _compiled
    BACKEND = "cython"
else:
    impl = _fallback
    BACKEND = "python"


def available_backends() -> dict[str, ModuleType]:
    out = {"python": _fallback}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def get_backend(name: str | None = None) -> ModuleType:
    if name is None:
        return impl
    try:
        return available_backends()[name]
    except KeyError:
        raise ValueError(f"backend {name!r} is not available") from None


def as2d(values: np.ndarray, dim: int, dtype=float) -> np.ndarray:
    """C-contiguous 2-D float view expected by the kernels."""
    arr = np.ascontiguousarray(values, dtype=dtype)
    return arr.reshape(1, -1) if dim == 1 else arr
