"""Selects the compiled kernel core when available.

Set ``BDPZ_PURE_PYTHON=1`` to force the NumPy fallback (used by the
benchmark and by backend-equivalence tests).
"""

import os

if os.environ.get("BDPZ_PURE_PYTHON"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as kernels

backend_name = kernels.BACKEND
