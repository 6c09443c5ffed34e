"""Backend selection for the time-stepping kernels.

The compiled extension is used when it was built; otherwise the numpy
versions are used.  Setting ``DELAYWAVE_PURE=1`` forces the numpy backend.
"""
import os

from . import _kernels_py

BACKEND = "python"
if not os.environ.get("DELAYWAVE_PURE"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        BACKEND = "cython"
else:
    _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py

leapfrog_1d = _impl.leapfrog_1d
leapfrog_2d = _impl.leapfrog_2d


def get_backend(name: str):
    """Return the kernel module called ``name`` (``"cython"`` or ``"python"``)."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            from . import _kernels
            return _kernels
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
