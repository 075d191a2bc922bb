"""Backend selection for the hull and PAVA kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module is used. Setting ``CSRISK_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("CSRISK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

lower_hull_indices = _impl.lower_hull_indices
pava = _impl.pava

__all__ = ["BACKEND", "lower_hull_indices", "pava"]
