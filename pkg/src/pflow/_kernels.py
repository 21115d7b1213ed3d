"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation is used. ``PFLOW_BACKEND=python`` forces the fallback and
``PFLOW_BACKEND=cython`` makes a missing extension an import error.
"""
import os

from . import _kernels_py

_requested = os.environ.get("PFLOW_BACKEND", "auto").lower()
if _requested not in ("auto", "python", "cython"):
    raise ImportError(f"PFLOW_BACKEND must be auto, python or cython, not {_requested!r}")

_compiled = None
if _requested != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        if _requested == "cython":
            raise

if _compiled is not None:
    _impl = _compiled
    BACKEND = "cython"
else:
    _impl = _kernels_py
    BACKEND = "python"


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["python"] + (["cython"] if _compiled is not None else [])


def operator_interior(u, h, p, eps):
    return _impl.operator_interior(u, h, p, eps)


def relax_sweep(v, h, p, eps, omega):
    return _impl.relax_sweep(v, h, p, eps, omega)


def relax_residual(v, h, p, eps):
    return _impl.relax_residual(v, h, p, eps)
