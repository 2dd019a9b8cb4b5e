"""JIT switch for the numeric kernels.

Kernels are written in a restricted, loop-based subset of Python so that the
same source runs either compiled by numba or as plain Python/numpy. Set
``GRADHYD_DISABLE_NUMBA=1`` (or run without numba installed) to force the
interpreted path.
"""

import os

_DISABLED = os.environ.get("GRADHYD_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None

NUMBA_ENABLED = (_nb is not None) and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise.

    Model kernels pass ``_nrt=False``: they never allocate, and skipping the
    reference counting on their array arguments halves the call overhead.
    """
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return _nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
