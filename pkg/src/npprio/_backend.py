"""Import-time selection between the compiled kernels and the numpy fallback.

Set ``NPPRIO_PURE=1`` to force the fallback even when the extension is built.
"""

import os

from . import _purepy

if os.environ.get("NPPRIO_PURE", "") not in ("", "0"):
    kernels = _purepy
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _purepy
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
