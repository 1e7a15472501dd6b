"""Numerical kernels: compiled fast path with a pure-numpy fallback.

The Cython extension ``_cykern`` carries the hot inner loops (symmetric
Jacobi eigendecomposition, exact greedy split search). When it is missing,
or when ``NETRCA_KERNELS=pure`` is set, the pure-numpy ``_pykern`` module
with identical semantics is used instead. ``benchmarks/bench_kernels.py``
compares the two.
"""

import os

from netrca.kernels import _pykern

_backend = _pykern
_BACKEND_NAME = "pure"

if os.environ.get("NETRCA_KERNELS", "").lower() != "pure":
    try:
        from netrca.kernels import _cykern

        _backend = _cykern
        _BACKEND_NAME = "compiled"
    except ImportError:
        pass

jacobi_eigh = _backend.jacobi_eigh
best_split = _backend.best_split


def backend_name():
    """Name of the active backend: "compiled" or "pure"."""
    return _BACKEND_NAME
