"""Optional numba acceleration for the hot numeric kernels.

Every kernel in this package is written against the plain numpy API, so the
same function body runs either JIT-compiled (default, when numba is importable)
or as ordinary Python. Set the environment variable ``WINDFREQ_DISABLE_NUMBA=1``
to force the pure-numpy path; ``benchmarks/backend_bench.py`` compares the two.
"""

import os

NUMBA_DISABLED = os.environ.get("WINDFREQ_DISABLE_NUMBA", "").strip() in ("1", "true", "yes")

if not NUMBA_DISABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        numba = None
        NUMBA_DISABLED = True
else:
    numba = None

USING_NUMBA = not NUMBA_DISABLED


def maybe_njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity decorator otherwise."""
    if USING_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def passthrough(func):
        return func

    if args and callable(args[0]):
        return args[0]
    return passthrough


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
