"""Backend selection for the hot loops.

The compiled extension is used when it was built; setting
``TLAGENT_PURE_PYTHON=1`` forces the numpy fallback.  ``BACKEND`` names the
active implementation.
"""

import os

from . import _kernels_py

if os.environ.get("TLAGENT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

forward = _impl.forward
boolean_spans = _impl.boolean_spans
prob_spans = _impl.prob_spans


def available_backends():
    """Map of backend name to kernel module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found
