"""Numba switch for the hot kernels.

Set ``SHOALMAP_DISABLE_NUMBA=1`` before import to force the pure-numpy path.
The flag is read once; tests and the benchmark reach both paths through the
explicit ``*_numba`` / ``*_numpy`` kernel names instead of toggling it.
"""

import os

_FLAG = os.environ.get("SHOALMAP_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity otherwise.

    Kernels are always compiled when numba is importable so the benchmark can
    compare both paths; ``USE_NUMBA`` only decides which one callers dispatch to.
    """
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def is_jitted(fn):
    return numba is not None and isinstance(fn, numba.core.registry.CPUDispatcher)
