"""Backend selection for the hot numeric kernels.

Kernels in :mod:`hyptree.kernels` come in two implementations: a plain
numpy/python one and a numba ``@njit`` one. Which one the library actually
calls is decided once, at import time, from the environment:

* ``HYPTREE_NUMBA=0`` (or ``false``/``off``/``no``) forces the pure path.
* anything else (including unset) uses numba when it is importable.

Both implementations stay importable regardless of the flag so that tests
and benchmarks can compare them directly.
"""

from __future__ import annotations

import os

_FALSY = ("0", "false", "off", "no")


def numba_requested() -> bool:
    return os.environ.get("HYPTREE_NUMBA", "1").strip().lower() not in _FALSY


try:
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay importable
    _njit = None
    HAS_NUMBA = False

NUMBA_ENABLED = HAS_NUMBA and numba_requested()


def jit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if not HAS_NUMBA:
        return fn
    return _njit(cache=True)(fn)


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
