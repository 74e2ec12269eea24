"""Numba acceleration toggle.

Hot kernels live in ``_kernels_numba`` (scalar loops under ``@njit``) with
vectorized numpy twins in ``_kernels_numpy``.  The active backend is chosen
once at import time: numba when importable, unless ``ZIPPERLAB_NO_NUMBA`` is
set to 1/true/yes.  Both backends implement the same functions and agree to
floating-point tolerance (not bitwise: libm implementations differ), so the
flag is an environment property, not a config knob.
"""

import os

_FLAG = os.environ.get("ZIPPERLAB_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes")

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled by ZIPPERLAB_NO_NUMBA")
    from numba import njit, prange  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag in tests
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        """Decorator stand-in: returns the function unchanged."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap

    prange = range


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
