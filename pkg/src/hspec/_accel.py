"""Optional numba acceleration.

Set ``HSPEC_DISABLE_JIT=1`` (or run without numba installed) to use the
pure-numpy kernels instead.
"""

import os

_FLAG = os.environ.get("HSPEC_DISABLE_JIT", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional extra
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """Compile ``func`` in nopython mode, or leave it as plain Python."""
    if numba is None:
        return func
    return numba.njit(cache=True, fastmath=False)(func)
