"""Kernel backend selection.

The hot numerical primitives (dense eigendecompositions, interior-point Schur
assembly) exist twice: a compiled Cython extension and a pure numpy fallback.
The compiled backend is picked automatically when importable; set
``TREEQCQP_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import importlib
import os

from . import pure

_fast = None
if os.environ.get("TREEQCQP_PURE", "0") != "1":
    try:
        _fast = importlib.import_module("treeqcqp._kernels._fast")
    except ImportError:
        _fast = None

_active = _fast if _fast is not None else pure


def backend_name() -> str:
    """Name of the selected backend: 'compiled' or 'pure'."""
    return "compiled" if _active is not pure else "pure"


def get_backend(name: str | None = None):
    """Return a backend module by name (None means the active one)."""
    if name is None:
        return _active
    if name == "pure":
        return pure
    if name == "compiled":
        if _fast is None:
            raise RuntimeError("compiled kernels are not available")
        return _fast
    raise ValueError(f"unknown backend {name!r}")


def eigh_sym(a):
    return _active.eigh_sym(a)


def eigh_herm(h):
    return _active.eigh_herm(h)


def schur_matrix(supports, sup_off, blocks, blk_off, scaling):
    return _active.schur_matrix(supports, sup_off, blocks, blk_off, scaling)
