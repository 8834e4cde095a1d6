"""Kernel backend selection: compiled extension if built, numpy otherwise.

Set THZGEN_PURE_PYTHON=1 to force the numpy fallback (useful for the
kernel benchmark and for debugging).
"""
import os

if os.environ.get("THZGEN_PURE_PYTHON", "") not in ("", "0"):
    from . import fallback as _impl

    BACKEND = "numpy"
else:
    try:
        from . import channel_kernels as _impl

        BACKEND = "cython"
    except ImportError:
        from . import fallback as _impl

        BACKEND = "numpy"

swm_accumulate = _impl.swm_accumulate

__all__ = ["swm_accumulate", "BACKEND"]
