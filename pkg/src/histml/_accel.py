"""Optional numba acceleration.

Set ``HISTML_DISABLE_NUMBA=1`` to force the pure-numpy kernels, e.g. when
debugging or on platforms without a working LLVM.
"""

import os

_FALSY = {"", "0", "false", "no", "off"}

NUMBA_DISABLED = os.environ.get("HISTML_DISABLE_NUMBA", "").strip().lower() not in _FALSY

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency, but keep the fallback honest
    _numba = None

USE_NUMBA = _numba is not None and not NUMBA_DISABLED


def njit(fn):
    """Compile ``fn`` with numba in nopython mode; raises if numba is missing."""
    if _numba is None:  # pragma: no cover
        raise RuntimeError("numba is not installed")
    return _numba.njit(cache=True)(fn)
