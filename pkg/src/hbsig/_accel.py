"""Numba switch.

Hot kernels are compiled with numba when it is importable and the
``HBSIG_NUMBA`` environment variable is not set to a false value
(``0``, ``false``, ``no``, ``off``).  Otherwise every kernel runs its
pure-numpy twin.  The choice is made once, at import time.
"""

import os

_FALSY = {"0", "false", "no", "off"}

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is optional
    numba = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("HBSIG_NUMBA", "1").strip().lower() not in _FALSY


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op decorator without numba."""
    kwargs.setdefault("cache", True)
    if NUMBA_AVAILABLE:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def decorator(func):
        return func

    return decorator


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
