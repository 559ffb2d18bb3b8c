"""Kernel backend selection.

The compiled ``regmg._core`` extension is used when it imports; otherwise,
or when ``REGMG_PURE_PYTHON`` is set in the environment, the numpy kernels
in ``regmg._kernels`` are used.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _kernels

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

_AVAILABLE: dict[str, ModuleType] = {"numpy": _kernels}
if _core is not None:
    _AVAILABLE["cython"] = _core

if os.environ.get("REGMG_PURE_PYTHON") or _core is None:
    kernels: ModuleType = _kernels
else:
    kernels = _core


def available() -> list[str]:
    return sorted(_AVAILABLE)


def current() -> str:
    return kernels.BACKEND


def set_backend(name: str) -> None:
    """Switch the process-wide kernel backend (``"numpy"`` or ``"cython"``)."""
    global kernels
    try:
        kernels = _AVAILABLE[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {available()}") from None
