"""Pick the compiled kernels when available, numpy otherwise.

Set ``AGLERKIT_PURE=1`` to force the numpy fallback.
"""
import os

from . import _pycore

if os.environ.get("AGLERKIT_PURE", "") not in ("", "0"):
    _core = None
else:
    try:
        from . import _core
    except ImportError:  # extension not built
        _core = None

BACKEND = "cython" if _core is not None else "python"
_impl = _core if _core is not None else _pycore

genkernel_forms = _impl.genkernel_forms
kernel_matrices = _impl.kernel_matrices
