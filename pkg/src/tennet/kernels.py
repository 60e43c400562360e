"""Backend selection for the training kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. ``TENNET_BACKEND=python`` forces the fallback and
``TENNET_BACKEND=cython`` makes a missing extension an import error.
"""
import os

from . import _kernels_py


def load_backend(name=None):
    """Return the kernel module for ``name`` (``"cython"``, ``"python"`` or ``None`` for auto)."""
    name = (name or os.environ.get("TENNET_BACKEND", "auto")).lower()
    if name not in ("auto", "cython", "python"):
        raise ValueError(f"unknown kernel backend {name!r}; expected auto, cython or python")
    if name == "python":
        return _kernels_py
    try:
        from . import _kernels
    except ImportError:
        if name == "cython":
            raise
        return _kernels_py
    return _kernels


_impl = load_backend()

BACKEND = _impl.BACKEND
MlpWorkspace = _impl.MlpWorkspace
TnnWorkspace = _impl.TnnWorkspace
adam_update = _impl.adam_update
