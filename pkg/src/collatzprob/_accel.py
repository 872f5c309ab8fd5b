"""JIT switch shared by every kernel module.

Set ``COLLATZPROB_DISABLE_JIT=1`` to route all hot loops through their
pure-numpy counterparts (also the path taken when numba is missing).
"""

import os

_FLAG = os.environ.get("COLLATZPROB_DISABLE_JIT", "0").strip().lower()

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep in practice
    HAS_NUMBA = False

JIT_ENABLED = HAS_NUMBA and _FLAG not in ("1", "true", "yes", "on")

if HAS_NUMBA:
    from numba import njit, prange
else:  # pragma: no cover

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper

    prange = range


def backend() -> str:
    return "numba" if JIT_ENABLED else "numpy"


def pick(kernel):
    """The compiled kernel, or its interpreted body when JIT is off."""
    if JIT_ENABLED:
        return kernel
    return getattr(kernel, "py_func", kernel)
