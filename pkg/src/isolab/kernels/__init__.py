"""Kernel backend selection.

The compiled Cython core is preferred when built; the numpy fallback
implements the identical arithmetic. ISOLAB_KERNEL=py or =cy forces a
backend (cy raises if the extension is missing).
"""
import os

from . import _zs_py

try:
    from . import _zs_cy

    HAVE_COMPILED = True
except ImportError:
    _zs_cy = None
    HAVE_COMPILED = False


def _select():
    forced = os.environ.get("ISOLAB_KERNEL", "").strip().lower()
    if forced == "py":
        return _zs_py
    if forced == "cy":
        if not HAVE_COMPILED:
            raise ImportError("ISOLAB_KERNEL=cy but the compiled kernel is not built")
        return _zs_cy
    if forced:
        raise ValueError(f"ISOLAB_KERNEL must be 'py' or 'cy', got {forced!r}")
    return _zs_cy if HAVE_COMPILED else _zs_py


_impl = _select()
BACKEND = "cy" if (HAVE_COMPILED and _impl is _zs_cy) else "py"

propagate_monodromy = _impl.propagate_monodromy
propagate_solution = _impl.propagate_solution
