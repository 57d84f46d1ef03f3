"""Backend selection for the substep kernel.

The compiled extension ``netcapture._core`` is used when it imports; set
``NETCAPTURE_BACKEND=python`` to force the numpy fallback.
"""

from __future__ import annotations

import os

from netcapture import _pycore

_forced = os.environ.get("NETCAPTURE_BACKEND", "").strip().lower()

_compiled = None
if _forced != "python":
    try:
        from netcapture import _core as _compiled
    except ImportError:  # extension not built
        if _forced == "compiled":
            raise

if _compiled is not None:
    BACKEND = "compiled"
    Stepper = _compiled.Stepper
    propagate_cw_points = _compiled.propagate_cw_points
else:
    BACKEND = "python"
    Stepper = _pycore.Stepper
    propagate_cw_points = _pycore.propagate_cw_points

PythonStepper = _pycore.Stepper
CompiledStepper = _compiled.Stepper if _compiled is not None else None


def available_backends() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])


def stepper_class(backend: str | None = None):
    if backend is None:
        return Stepper
    if backend == "python":
        return PythonStepper
    if backend == "compiled":
        if CompiledStepper is None:
            raise RuntimeError("compiled core is not built")
        return CompiledStepper
    raise ValueError(f"unknown backend {backend!r}")
