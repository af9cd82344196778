"""Kernel backend selection.

The compiled extension is used when importable; set ``CRASHNET_PURE_PYTHON=1``
to force the NumPy fallback.
"""
import os

if os.environ.get("CRASHNET_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        from . import _pykernels as _impl

BACKEND = _impl.BACKEND
joint_mi = _impl.joint_mi
perm_mi = _impl.perm_mi
fisher_yates = _impl.fisher_yates
