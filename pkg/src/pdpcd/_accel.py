"""Switch between numba-compiled kernels and their pure-numpy fallbacks.

Set ``PDPCD_DISABLE_NUMBA=1`` in the environment before importing the package
to force the numpy path (useful for debugging and for the kernel benchmark).
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("PDPCD_DISABLE_NUMBA", "0").lower() in _FALSY


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        import numba

        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda f: f
