"""Pick the kernel implementation at import time.

The compiled module is used when it was built; setting
``ISODIFFI_PURE_PYTHON=1`` forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("ISODIFFI_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        kernels = _pykernels

BACKEND: str = kernels.NAME


def available_backends() -> dict:
    """Return every importable kernel module keyed by name."""
    found = {"numpy": _pykernels}
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
