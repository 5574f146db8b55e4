"""Backend selection for the flow right-hand side.

The compiled extension implements the full right-hand side evaluation as C
loops over an orthonormalised frame; the pure-numpy fallback is the
module-level einsum pipeline.  Whichever is importable at package load wins;
both remain addressable for differential tests and benchmarks.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .flow_tensors import rhs_matrices as _python_rhs

__all__ = ["active_rhs", "backend_name", "get_rhs", "available_backends"]

RhsFn = Callable[[np.ndarray, np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

try:
    from . import _fast

    def _compiled_rhs(c, g, j):
        return _fast.flow_rhs(
            np.ascontiguousarray(c), np.ascontiguousarray(g), np.ascontiguousarray(j)
        )

    _COMPILED: RhsFn | None = _compiled_rhs
except ImportError:  # pragma: no cover - depends on build environment
    _COMPILED = None

_ACTIVE: RhsFn = _COMPILED if _COMPILED is not None else _python_rhs
_ACTIVE_NAME = "compiled" if _COMPILED is not None else "python"


def active_rhs() -> RhsFn:
    """(c, g, J) -> (dg/dt, dJ/dt) on the fastest available backend."""
    return _ACTIVE


def backend_name() -> str:
    return _ACTIVE_NAME


def available_backends() -> tuple[str, ...]:
    return ("python", "compiled") if _COMPILED is not None else ("python",)


def get_rhs(backend: str = "auto") -> RhsFn:
    """Explicit backend access for parity tests and benchmarks."""
    if backend == "auto":
        return _ACTIVE
    if backend == "python":
        return _python_rhs
    if backend == "compiled":
        if _COMPILED is None:
            raise RuntimeError("compiled backend is not available in this build")
        return _COMPILED
    raise ValueError(f"unknown backend {backend!r}")
