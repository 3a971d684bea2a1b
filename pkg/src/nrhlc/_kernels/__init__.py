"""Hot kernels: compiled when the extension is built, numpy otherwise.

Set NRHLC_PURE_PYTHON=1 to force the numpy implementation.
"""
import os

from . import lstm_py

BACKEND = "python"
lstm_forward = lstm_py.lstm_forward
lstm_backward = lstm_py.lstm_backward

if not os.environ.get("NRHLC_PURE_PYTHON"):
    try:
        from . import _lstm
    except ImportError:
        pass
    else:
        BACKEND = "compiled"
        lstm_forward = _lstm.lstm_forward
        lstm_backward = _lstm.lstm_backward


def backends() -> dict:
    """Available implementations by name (the compiled one only if built)."""
    found = {"python": (lstm_py.lstm_forward, lstm_py.lstm_backward)}
    try:
        from . import _lstm
    except ImportError:
        return found
    found["compiled"] = (_lstm.lstm_forward, _lstm.lstm_backward)
    return found
