"""Backend selection for the hot kernels.

The compiled extension is used when it imported cleanly; otherwise the numpy
fallback runs.  Both produce identical results.
"""

from __future__ import annotations

from types import ModuleType

from . import _fallback

try:  # pragma: no cover - depends on the build
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

_BACKENDS: dict[str, ModuleType] = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = "compiled" if _compiled is not None else "python"


def available() -> list[str]:
    return sorted(_BACKENDS)


def active() -> str:
    return _active


def use_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available()})")
    _active = name


def get_backend(name: str | None = None) -> ModuleType:
    return _BACKENDS[name or _active]
