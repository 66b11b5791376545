"""Selection between the numba-compiled and pure-numpy kernel paths.

Set ``BATSFIT_DISABLE_NUMBA=1`` in the environment before import to force the
numpy path. The numba path is also skipped when numba is not importable.
"""
import os

_FLAG = os.environ.get("BATSFIT_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _FLAG not in {"1", "true", "yes", "on"}


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if numba is None:  # pragma: no cover
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
