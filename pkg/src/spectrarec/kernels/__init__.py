"""Hot convolution kernels.

The compiled Cython module is used when it was built and importable; otherwise
the numpy implementation is selected. Set ``SPECTRAREC_PURE_PYTHON=1`` to force
the fallback.
"""
import os

import numpy as np

from . import _conv_py

BACKEND = "python"
_impl = _conv_py

if not os.environ.get("SPECTRAREC_PURE_PYTHON"):
    try:
        from . import _conv as _compiled
    except ImportError:
        _compiled = None
    else:
        _impl = _compiled
        BACKEND = "cython"
else:
    _compiled = None


def _contig(a, dtype):
    return np.ascontiguousarray(a, dtype=dtype)


def conv3x3_forward(x, w, b, impl=None):
    """Same-padded 3x3 convolution of ``x`` (H, W, Ci) with ``w`` (3, 3, Ci, Co)."""
    impl = impl or _impl
    dtype = np.result_type(x.dtype, w.dtype)
    return impl.conv3x3_forward(_contig(x, dtype), _contig(w, dtype), _contig(b, dtype))


def conv3x3_backward(x, w, gout, impl=None):
    impl = impl or _impl
    dtype = np.result_type(x.dtype, w.dtype, gout.dtype)
    return impl.conv3x3_backward(_contig(x, dtype), _contig(w, dtype), _contig(gout, dtype))


def implementations():
    """Available backends by name, for benchmarks and cross-checks."""
    out = {"python": _conv_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
