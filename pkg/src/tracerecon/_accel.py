"""Backend selection for the hot kernels.

Set ``TRACERECON_DISABLE_NUMBA=1`` to force the pure-numpy code paths.
"""
import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("TRACERECON_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it unchanged."""
    if HAS_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
