"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``JMPPC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
if not os.environ.get("JMPPC_PURE_PYTHON"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

loess_kernel = _impl.loess_kernel
concordance_kernel = _impl.concordance_kernel

__all__ = ["BACKEND", "loess_kernel", "concordance_kernel"]
