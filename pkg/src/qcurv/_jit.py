"""Optional numba acceleration.

Set ``QCURV_NO_NUMBA=1`` to run every kernel as plain Python/numpy.  The
kernels are written in the numba-compatible subset, so both paths execute
the same arithmetic.
"""

import os

_FLAG = os.environ.get("QCURV_NO_NUMBA", "").strip().lower()
USE_NUMBA = _FLAG not in ("1", "true", "yes", "on")

if USE_NUMBA:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:

    def njit(func):
        return _njit(cache=True, fastmath=False)(func)

else:

    def njit(func):
        return func


BACKEND = "numba" if USE_NUMBA else "python"
