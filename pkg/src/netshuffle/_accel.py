"""Backend selection for the hot kernels.

Numba is used when it imports cleanly and ``NETSHUFFLE_NUMBA`` is not set to a
false value ("0", "false", "no", "off"). Every kernel also has a pure-numpy
implementation that produces identical results from identical inputs.
"""

from __future__ import annotations

import os

_FALSE = {"0", "false", "no", "off"}


def _numba_requested() -> bool:
    return os.environ.get("NETSHUFFLE_NUMBA", "1").strip().lower() not in _FALSE


try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _numba_requested()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity decorator otherwise.

    The compiled function is always created when numba is importable so that the
    benchmark and the cross-backend tests can reach it even if ``USE_NUMBA`` is
    off. Dispatch between backends happens in :mod:`netshuffle.kernels`.
    """
    if len(args) == 1 and callable(args[0]):
        fn, args = args[0], ()
    else:
        fn = None
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        deco = numba.njit(*args, **kwargs)
        return deco(fn) if fn is not None else deco
    if fn is not None:
        return fn

    def wrap(fn):
        return fn

    return wrap


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
