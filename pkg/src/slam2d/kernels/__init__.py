"""Numeric kernels with a compiled core and a pure-NumPy fallback.

The active backend is chosen at import time. Set ``SLAM2D_KERNELS=pure`` or
``SLAM2D_KERNELS=cython`` to force one; by default the compiled core is used
when it imports cleanly. Integer work (cell traversal, index math) is
bit-identical across backends; floating-point reductions may differ in the
last ulp because summation order is not pinned.
"""

from __future__ import annotations

import os

from . import _pure

_requested = os.environ.get("SLAM2D_KERNELS", "").strip().lower()

if _requested == "pure":
    _impl = _pure
    BACKEND = "pure"
elif _requested in ("", "cython"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _pure
        BACKEND = "pure"
else:
    raise ValueError(f"unknown kernel backend {_requested!r}; use 'pure' or 'cython'")

raycast = _impl.raycast
update_grid = _impl.update_grid
scan_loglik = _impl.scan_loglik
match_scan = _impl.match_scan

__all__ = ["BACKEND", "match_scan", "raycast", "scan_loglik", "update_grid"]
