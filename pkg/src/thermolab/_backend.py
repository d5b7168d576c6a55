"""Picks the compiled kernels when available.

Set THERMOLAB_BACKEND=python to force the numpy implementation.
"""
import os

from . import _kernels_py

_forced = os.environ.get("THERMOLAB_BACKEND", "").strip().lower()

if _forced == "python":
    impl = _kernels_py
    NAME = "python"
else:
    try:
        from . import _ckernels as impl
        NAME = "cython"
    except ImportError:
        impl = _kernels_py
        NAME = "python"

kernel_values = impl.kernel_values
panel_sum = impl.panel_sum
