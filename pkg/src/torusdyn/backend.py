"""Integrator backend selection.

The compiled Cython extension is preferred; the pure-numpy implementation is
a drop-in fallback (same algorithm, same tableau).  Set TORUSDYN_PURE_PYTHON=1
to force the fallback, e.g. for benchmarking or debugging.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("TORUSDYN_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

advance_batch = _impl.advance_batch
advance_var_batch = _impl.advance_var_batch
iterate_map_batch = _impl.iterate_map_batch


def backend_name() -> str:
    return "compiled" if _impl.COMPILED else "numpy"


def get_backend(name: str):
    """Return the raw kernel module for an explicit backend name."""
    if name == "numpy":
        return _kernels_py
    if name == "compiled":
        from . import _kernels  # raises ImportError if the extension is missing

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
