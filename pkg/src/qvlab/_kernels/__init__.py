"""Kernel backend selection.

Imports the compiled Cython kernels when the extension is present, otherwise
falls back to the pure-Python reference implementation.  Set
``QVLAB_KERNEL_BACKEND=python`` to force the fallback (used by the parity
tests and the benchmark).
"""

import os

from . import _ref

if os.environ.get("QVLAB_KERNEL_BACKEND", "").lower() == "python":
    _impl = _ref
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _ref
        BACKEND = "python"

qv_sum = _impl.qv_sum
masked_qv_sum = _impl.masked_qv_sum
masked_abs_sum = _impl.masked_abs_sum
ito_cumsum = _impl.ito_cumsum

__all__ = ["BACKEND", "qv_sum", "masked_qv_sum", "masked_abs_sum", "ito_cumsum"]
