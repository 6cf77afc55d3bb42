"""Optional numba acceleration.

Set ``FBMC_DISABLE_NUMBA=1`` to force the pure-numpy code paths (the flag is
read once at import time).
"""
import os

_disabled = os.environ.get("FBMC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        # identity decorator usable both bare and with arguments
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


def numba_enabled():
    return HAVE_NUMBA
