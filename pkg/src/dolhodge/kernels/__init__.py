"""Hot kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time: numba when importable, unless
``DOLHODGE_NUMBA=0`` forces the numpy path.  Both implementations perform the
per-element arithmetic in the same order; results agree to the last ulp or so
(LLVM may contract multiply-adds), and any fixed backend is exactly
deterministic run to run.
"""

from __future__ import annotations

from ..runtime import numba_requested
from . import _numpy as _np_impl

_impl = _np_impl
BACKEND = "numpy"

if numba_requested():
    try:
        from . import _numba as _nb_impl

        _impl = _nb_impl
        BACKEND = "numba"
    except ImportError:
        pass

b_stencil = _impl.b_stencil
dbar_core = _impl.dbar_core
b_stencil3 = _impl.b_stencil3
dbar_core3 = _impl.dbar_core3


def backends():
    """All importable backends, for equivalence tests and the benchmark."""
    out = {"numpy": _np_impl}
    try:
        from . import _numba as _nb_impl

        out["numba"] = _nb_impl
    except ImportError:
        pass
    return out
