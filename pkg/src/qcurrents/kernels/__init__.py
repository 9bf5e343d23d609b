"""Hot kernels: compiled core when built, numpy fallback otherwise.

Set ``QCURRENTS_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _reference

BACKEND = "python"
if os.environ.get("QCURRENTS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _reference
else:
    _impl = _reference

rhs = _impl.rhs
rk4_run = _impl.rk4_run
current_components = _impl.current_components
channel_aux = _reference.channel_aux

STATUS_OK = _reference.STATUS_OK
STATUS_NONFINITE = _reference.STATUS_NONFINITE
STATUS_TRACE_DRIFT = _reference.STATUS_TRACE_DRIFT


def backends():
    """Available implementations, keyed by name."""
    out = {"python": _reference}
    try:
        from . import _core

        out["compiled"] = _core
    except ImportError:
        pass
    return out
