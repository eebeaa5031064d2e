"""Backend selection for the pointwise field kernels.

HCSK_BACKEND=numpy forces the vectorised numpy path, HCSK_BACKEND=numba
requires numba, anything else (default "auto") uses numba when importable.
"""

import os
import warnings

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional at runtime
    numba = None
else:
    # old system TBB: numba falls back to another threading layer on its own
    warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)

_requested = os.environ.get("HCSK_BACKEND", "auto").strip().lower()
if _requested == "numba" and numba is None:
    raise ImportError("HCSK_BACKEND=numba but numba is not installed")

_active = "numba" if (numba is not None and _requested != "numpy") else "numpy"


def active():
    return _active


def set_backend(name):
    """Switch backend at runtime (used by tests and the benchmark)."""
    global _active
    if name not in ("numba", "numpy"):
        raise ValueError(name)
    if name == "numba" and numba is None:
        raise ImportError("numba is not installed")
    _active = name


def set_threads(k):
    if numba is not None and k:
        numba.set_num_threads(max(1, min(int(k), numba.config.NUMBA_NUM_THREADS)))


def njit(*args, **kwargs):
    if numba is None:
        def wrap(fn):
            return fn
        return wrap
    return numba.njit(*args, **kwargs)


prange = numba.prange if numba is not None else range
