"""Hot-kernel backend selection.

The compiled Cython module is preferred when present; the pure-NumPy fallback
is used otherwise. Set LLAFT_PURE_KERNELS=1 to force the fallback (useful for
benchmarking and debugging).
"""
from __future__ import annotations

import os

from . import pure as _pure

_impl = _pure
if os.environ.get("LLAFT_PURE_KERNELS", "").strip().lower() not in {"1", "true", "yes"}:
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

log_likelihood_sum = _impl.log_likelihood_sum
best_segmented_fit = _impl.best_segmented_fit


def backend() -> str:
    """Name of the active kernel backend: 'native' or 'pure'."""
    return _impl.BACKEND
