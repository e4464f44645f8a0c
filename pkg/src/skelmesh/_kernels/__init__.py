"""Nearest-neighbor kernels with backend selection at import time.

The compiled Cython backend is preferred; the numpy implementation is the
fallback. Set ``SKELMESH_PURE_PYTHON=1`` to force the fallback. Both backends
implement the same four functions with identical semantics:

    nearest(query, ref)                     -> (idx, dist)
    nearest2(query, ref)                    -> (i1, d1, i2, d2)
    nearest_cone(query, ref, cos, dmax)     -> (i1, d1, i2, d2, cos12)
    knn(points, k)                          -> (n, k) neighbor indices
"""
import os

from . import _numpy

if os.environ.get("SKELMESH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _numpy
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _numpy

nearest = _impl.nearest
nearest2 = _impl.nearest2
nearest_cone = _impl.nearest_cone
knn = _impl.knn


def backend() -> str:
    """Name of the active backend: "compiled" or "numpy"."""
    return _impl.BACKEND
