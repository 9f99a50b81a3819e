"""Kernel backend selection.

The numeric kernels in :mod:`symstep.kernels` are written once, as plain
functions over contiguous float64 arrays, and decorated with
:func:`jit_kernel`.  Which decorator that is depends on the
``SYMSTEP_BACKEND`` environment variable, read once at import time:

* ``numba`` -- compile kernels with :func:`numba.njit` (cached, nogil).
* ``numpy`` -- leave kernels as the plain interpreted functions.
* unset    -- use numba when importable, else fall back to numpy.

``BACKEND`` records the active choice.  Under the numba backend the original
Python callables remain reachable as ``kernel.py_func``, which is what the
benchmark harness uses to compare the two paths in a single process.
"""

import os

_requested = os.environ.get("SYMSTEP_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"SYMSTEP_BACKEND={_requested!r}: expected 'numba' or 'numpy'"
    )

BACKEND = "numpy"


def _plain(func):
    return func


jit_kernel = _plain

if _requested in ("", "numba"):
    try:
        from numba import njit
    except ImportError:
        if _requested == "numba":
            raise
    else:
        def jit_kernel(func):
            return njit(cache=True, nogil=True)(func)

        BACKEND = "numba"
