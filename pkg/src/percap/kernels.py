"""Backend selection for the hot kernels.

The compiled extension (``percap._corekern``) is preferred; the numpy
implementation (``percap._kernels_py``) is the fallback. Set
``PERCAP_BACKEND=py`` or ``PERCAP_BACKEND=c`` to force a choice; forcing
``c`` raises if the extension is missing.
"""

from __future__ import annotations

import os

_forced = os.environ.get("PERCAP_BACKEND", "").strip().lower()

if _forced == "py":
    from percap import _kernels_py as _impl
elif _forced == "c":
    from percap import _corekern as _impl  # type: ignore[no-redef]
else:
    try:
        from percap import _corekern as _impl  # type: ignore[no-redef]
    except ImportError:
        from percap import _kernels_py as _impl  # type: ignore[no-redef]

cluster_labels = _impl.cluster_labels
nearest_bulk = _impl.nearest_bulk
range_max = _impl.range_max


def backend_name() -> str:
    """Name of the active kernel backend: 'c' (compiled) or 'py'."""
    return _impl.BACKEND
