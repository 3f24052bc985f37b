"""Kernel backend selection.

The compiled Cython extension is preferred when importable; otherwise the
NumPy fallback is used.  Override with the environment variable
``POROHYST_KERNELS`` set to ``auto`` (default), ``compiled`` or ``python``.
Both backends implement identical semantics; summation order may differ in
the last bits, so bit-level reproducibility holds per backend.
"""

from __future__ import annotations

import os

_choice = os.environ.get("POROHYST_KERNELS", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise RuntimeError(
        f"POROHYST_KERNELS={_choice!r} invalid; use auto, compiled or python"
    )

if _choice in ("auto", "compiled"):
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "compiled":
            raise
        from . import _kernels_py as _impl
else:
    from . import _kernels_py as _impl

BACKEND = _impl.BACKEND_NAME

commit_plays = _impl.commit_plays
branch_eval = _impl.branch_eval
memory_outputs = _impl.memory_outputs
dissipation_between = _impl.dissipation_between
weighted_distance = _impl.weighted_distance
active_levels = _impl.active_levels
laplacian_1d = _impl.laplacian_1d
laplacian_2d = _impl.laplacian_2d
