"""Select the compiled kernels when available, else the numpy fallback.

Set ZKW_PURE_PYTHON=1 to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("ZKW_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

overlap_kernel_array = _impl.overlap_kernel_array
trilinear_sum = _impl.trilinear_sum
count_slabs = _impl.count_slabs
pair_minima = _impl.pair_minima


def backends():
    """Available kernel modules keyed by name (used by tests and the benchmark)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
