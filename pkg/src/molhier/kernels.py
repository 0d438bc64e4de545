"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy reference implementation in ``_pykernels`` is used. Setting
``MOLHIER_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load() -> tuple[ModuleType, str]:
    if os.environ.get("MOLHIER_BACKEND", "").lower() == "python":
        return _pykernels, "python"
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "cython"


_impl, BACKEND = _load()


def use_backend(name: str) -> None:
    """Switch backends at runtime (``"cython"`` or ``"python"``); used by benchmarks and tests."""
    global _impl, BACKEND
    if name == "python":
        _impl, BACKEND = _pykernels, "python"
    elif name == "cython":
        from . import _ckernels

        _impl, BACKEND = _ckernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        return False
    return True


def match_embeddings(*args):
    return _impl.match_embeddings(*args)


def jacobi_eigh(matrix, rel_tol=1e-15, max_sweeps=100):
    return _impl.jacobi_eigh(matrix, rel_tol, max_sweeps)


def gin_aggregate(h, eps, indptr, indices, etype, edge_table):
    return _impl.gin_aggregate(h, eps, indptr, indices, etype, edge_table)
