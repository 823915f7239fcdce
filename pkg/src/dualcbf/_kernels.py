"""Kernel backend selection.

The compiled ``_core`` extension is used when importable; otherwise the
pure-Python ``_pykernels`` module. Setting ``DUALCBF_PURE_PYTHON=1`` forces the
fallback.
"""

import os

from . import _pykernels

NOMINAL = _pykernels.NOMINAL
SINGLE1 = _pykernels.SINGLE1
SINGLE2 = _pykernels.SINGLE2
DUAL = _pykernels.DUAL
INFEASIBLE = _pykernels.INFEASIBLE

_backend = _pykernels
BACKEND = "python"
if os.environ.get("DUALCBF_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _backend  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _backend = _pykernels

edt_sq = _backend.edt_sq
raycast = _backend.raycast
project_pair = _backend.project_pair
soft_pair = _backend.soft_pair
