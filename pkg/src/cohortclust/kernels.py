"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise (or when
``COHORTCLUST_PURE=1`` is set) the numpy twin is used. Both produce
identical results.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("COHORTCLUST_PURE", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

pairwise_euclidean = _impl.pairwise_euclidean
lloyd = _impl.lloyd
pam_build = _impl.pam_build
pam_swap = _impl.pam_swap
agglomerate = _impl.agglomerate


def backends() -> dict:
    """Name -> module for every importable backend."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
