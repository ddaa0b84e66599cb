"""Hot-loop kernels with backend selection.

The compiled Cython extension is used when it imports; otherwise the numpy
implementation in ``_pykernels`` takes over. Both expose::

    hflow_rhs(padded, spacing) -> (*shape, n, n)
    sym_eigvals(mats) -> (..., n)

``use_backend("python")`` forces the fallback, e.g. for benchmarking.
"""
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active = "compiled" if _ckernels is not None else "python"


def available():
    return sorted(_BACKENDS)


def backend():
    """Name of the active backend."""
    return _active


def use_backend(name):
    """Select a backend by name; returns the previously active one."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; available: {available()}")
    prev, _active = _active, name
    return prev


def hflow_rhs(padded, spacing):
    return _BACKENDS[_active].hflow_rhs(padded, spacing)


def sym_eigvals(mats):
    return _BACKENDS[_active].sym_eigvals(mats)
