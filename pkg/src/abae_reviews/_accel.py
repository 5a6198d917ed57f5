"""Numba switch shared by the kernel modules.

Set ``ABAE_REVIEWS_DISABLE_NUMBA=1`` to force the pure-numpy code paths.
``ABAE_REVIEWS_THREADS`` caps the numba thread pool.
"""
import os

_FALSEY = {"0", "false", "no", "off", ""}


def _env_flag(name, default="0"):
    return os.environ.get(name, default).strip().lower() not in _FALSEY


try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _env_flag("ABAE_REVIEWS_DISABLE_NUMBA")

if USE_NUMBA and os.environ.get("ABAE_REVIEWS_THREADS"):
    numba.set_num_threads(max(1, int(os.environ["ABAE_REVIEWS_THREADS"])))


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator.

    The decorated function must stay valid plain Python so the fallback
    path is the same source.
    """
    kwargs.setdefault("cache", True)
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


def select(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
