"""Backend selection for the numeric kernels.

Set ``RADARBEV_PURE_NUMPY=1`` to bypass numba and run the vectorized numpy
fallbacks. numba is also skipped silently when it cannot be imported.
"""

import os

_FLAG = "RADARBEV_PURE_NUMPY"


def _truthy(value):
    return value.strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and not _truthy(os.environ.get(_FLAG, ""))


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    Kernels are always compiled when numba exists (so both paths can be
    benchmarked and cross-checked); ``USE_NUMBA`` only controls dispatch.
    """
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
