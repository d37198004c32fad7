"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``NEWSGEO_PURE_PYTHON=1``
to force the pure-Python fallback.
"""

from __future__ import annotations

import os
from array import array
from types import ModuleType

from newsgeo import _purepy


def _load() -> ModuleType:
    if os.environ.get("NEWSGEO_PURE_PYTHON", "") not in ("", "0"):
        return _purepy
    try:
        from newsgeo import _speedups
    except ImportError:
        return _purepy
    return _speedups


_impl = _load()

BACKEND: str = _impl.BACKEND
bm25_accumulate = _impl.bm25_accumulate
bm25_topk = _impl.bm25_topk


def available_backends() -> dict[str, ModuleType]:
    backends = {"python": _purepy}
    try:
        from newsgeo import _speedups

        backends["cython"] = _speedups
    except ImportError:
        pass
    return backends


def haversine_batch(lat1, lon1, lat2, lon2, radius: float) -> list[float]:
    """Vectorised haversine on four equal-length coordinate sequences."""
    return _impl.haversine_batch(
        array("d", lat1), array("d", lon1), array("d", lat2), array("d", lon2), radius
    )
