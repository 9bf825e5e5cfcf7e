"""Switch between numba-compiled kernels and their plain Python/numpy bodies.

Set ``EABLOCK_DISABLE_JIT=1`` before import to run every kernel uncompiled.
Compiled kernels keep the original function on ``.py_func`` so benchmarks
can call both paths in one process.
"""

import os

_DISABLE = os.environ.get("EABLOCK_DISABLE_JIT", "0").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_ENABLED = numba is not None and not _DISABLE


def jit(fn):
    """Compile ``fn`` in nopython mode unless the fallback path is selected."""
    if not JIT_ENABLED:
        fn.py_func = fn
        return fn
    return numba.njit(cache=True)(fn)


def backend_name() -> str:
    return "numba" if JIT_ENABLED else "python"
