"""Kernel backend selection: compiled extension if available, numpy fallback.

Set ``HAMFLOW_PURE_PYTHON=1`` to force the fallback (used by the backend
parity tests and the benchmark).
"""
from __future__ import annotations

import os

if os.environ.get("HAMFLOW_PURE_PYTHON"):
    from . import _kernels_py as impl

    BACKEND = "python"
else:
    try:
        from . import _ext as impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as impl  # type: ignore[no-redef]

        BACKEND = "python"

h_example = impl.h_example
b_example = impl.b_example
iem_apply = impl.iem_apply
flow_psi = impl.flow_psi
