"""Backend selection for the numeric kernels.

Kernels are written once as loop code over numpy arrays.  By default they are
compiled with ``numba.njit``; setting ``ONLINECOLOR_NO_NUMBA=1`` in the
environment runs the identical code as plain Python on numpy arrays, which is
slow but useful for debugging and for platforms without numba.
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("ONLINECOLOR_NO_NUMBA", "").strip().lower()
USE_NUMBA = _FLAG not in ("1", "true", "yes", "on")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def kernel(fn):
    """Compile ``fn`` in nopython mode when numba is enabled."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn
