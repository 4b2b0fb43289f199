"""Kernel backend selection.

Imports the compiled core when it is built, otherwise falls back to the
pure-numpy reference. Set GAITPRED_FORCE_REFERENCE=1 to force the fallback
(used by the backend-agreement tests and the kernel benchmark).
"""

import os

from . import reference

if os.environ.get("GAITPRED_FORCE_REFERENCE") == "1":
    _impl = reference
    BACKEND = "reference"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = reference
        BACKEND = "reference"

rnn_forward = _impl.rnn_forward
rnn_backward = _impl.rnn_backward
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
