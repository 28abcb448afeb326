"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting THERMION_PURE_PYTHON=1
forces the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("THERMION_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"

helmholtz_matrix = _impl.helmholtz_matrix
helmholtz_apply = _impl.helmholtz_apply
numerov_batch = _impl.numerov_batch


def backend_module(name: str):
    """Return the kernel module for ``name`` in {"python", "compiled"}."""
    if name == "python":
        return _kernels_py
    from . import _kernels
    return _kernels
