"""Kernel backend selected at import.

The compiled Cython core is used when it was built; otherwise, or when the
environment variable ``ALEBGK_PURE_PYTHON`` is set to a non-empty value,
the numpy fallback is used. Both expose the same functions.
"""
import os

from . import _fallback

if os.environ.get("ALEBGK_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

advect = _impl.advect
moments = _impl.moments
relax = _impl.relax
interp = _impl.interp
neighbor_count = _impl.neighbor_count
neighbor_fill = _impl.neighbor_fill


def get(name: str):
    """Kernel module by name: ``"compiled"`` or ``"python"``."""
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
