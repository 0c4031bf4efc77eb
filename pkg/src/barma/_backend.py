"""Kernel backend selection.

The compiled extension is preferred when importable; BARMA_BACKEND=python or
BARMA_BACKEND=cython forces a choice (the latter raises if the extension is
missing, so misconfigured deployments fail loudly instead of running slow).
"""

from __future__ import annotations

import os

from barma import _kernels_py

_FORCED = os.environ.get("BARMA_BACKEND", "").strip().lower()

if _FORCED in ("python", "py"):
    kernels = _kernels_py
elif _FORCED in ("cython", "c"):
    from barma import _kernels_cy as kernels  # type: ignore[no-redef]
else:
    try:
        from barma import _kernels_cy as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py


def backend_name() -> str:
    """Name of the active kernel backend ('cython' or 'python')."""
    return kernels.BACKEND_NAME
