"""Select the element-kernel backend at import time.

The compiled extension is used when it is importable.  Setting the
environment variable ``LQGIBBS_PURE_PYTHON=1`` forces the pure-Python
implementation, which is also the automatic fallback.
"""
import os

if os.environ.get("LQGIBBS_PURE_PYTHON", "") not in ("", "0"):
    from ._kernels_py import *  # noqa: F401,F403
    from ._kernels_py import BACKEND
else:
    try:
        from ._kernels import *  # noqa: F401,F403
        from ._kernels import BACKEND
    except ImportError:
        from ._kernels_py import *  # noqa: F401,F403
        from ._kernels_py import BACKEND

from . import _kernels_py as python_backend  # noqa: E402


def compiled_backend():
    """Return the compiled kernel module, or ``None`` when it is not built."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


__all__ = [
    "ODD_POW", "EVEN_POW", "ODD_SMOOTH", "SMOOTH_DERIV", "BACKEND",
    "moments", "assemble_1d", "assemble_2d", "python_backend", "compiled_backend",
]
