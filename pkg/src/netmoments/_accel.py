"""Numba toggle.

Set ``NETMOMENTS_DISABLE_NUMBA=1`` to force the pure-numpy code paths. If numba
is not importable the numpy paths are used automatically.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("NETMOMENTS_DISABLE_NUMBA", "0").lower() not in (
    "1",
    "true",
    "yes",
)


def njit(func):
    """``numba.njit(cache=True)`` when numba is enabled, identity otherwise."""
    if not USE_NUMBA:
        return func
    return numba.njit(cache=True)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
