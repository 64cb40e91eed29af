"""Pick the sweep kernels at import time.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy implementation in ``_pykernels``. ``MBDP_BACKEND=python`` forces
the fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from mbdp import _pykernels


def _load_compiled() -> ModuleType | None:
    try:
        from mbdp import _ckernels
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()

if os.environ.get("MBDP_BACKEND", "").lower() == "python" or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def available() -> list[str]:
    return ["cython", "python"] if _compiled is not None else ["python"]


def kernels(name: str | None = None) -> ModuleType:
    name = name or BACKEND
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built; reinstall with a C compiler")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1
