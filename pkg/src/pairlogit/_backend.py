"""Kernel backend selection.

Numerical kernels are written once, in a style that compiles under numba's
nopython mode but also runs unmodified as plain numpy/Python. The active
backend is chosen at import time from the PAIRLOGIT_BACKEND environment
variable:

    auto    use numba if it imports, else fall back to numpy (default)
    numba   require numba; raise if it is unavailable
    numpy   skip compilation entirely

The two paths execute the same arithmetic in the same order, so for a fixed
seed they produce bit-identical streams on builds where the libm calls agree.
"""

import os

_requested = os.environ.get("PAIRLOGIT_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"PAIRLOGIT_BACKEND must be one of auto/numba/numpy, got {_requested!r}"
    )

_backend = "numpy"
if _requested in ("auto", "numba"):
    try:
        import numba

        _backend = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _backend = "numpy"


def active_backend() -> str:
    """Name of the backend actually in use: 'numba' or 'numpy'."""
    return _backend


def jit_kernel(fn):
    """Compile `fn` as a nopython kernel, or return it untouched on the
    numpy backend. Applied at definition time so that kernels calling other
    kernels resolve to the compiled versions."""
    if _backend == "numba":
        return numba.njit(cache=True, nogil=True)(fn)
    return fn
