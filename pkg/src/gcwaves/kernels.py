"""Hot-kernel dispatch: compiled extension when available, NumPy otherwise.

Set GCWAVES_PURE=1 in the environment to force the NumPy path (used by the
benchmark and the parity tests).
"""

from __future__ import annotations

import os

from . import _ref

_accel = None
if os.environ.get("GCWAVES_PURE", "0") != "1":
    try:
        from . import _accel as _accel_mod
        _accel = _accel_mod
    except ImportError:
        _accel = None

BACKEND = "accel" if _accel is not None else "ref"

bw_coupling_matrix = _accel.bw_coupling_matrix if _accel else _ref.bw_coupling_matrix
divisor_scan = _accel.divisor_scan if _accel else _ref.divisor_scan
# the shifted variant calls back into Python for g; it stays in NumPy
bw_coupling_matrix_shifted = _ref.bw_coupling_matrix_shifted


def backends():
    """Both implementations, for benchmarks and parity checks."""
    out = {"ref": _ref}
    if _accel is not None:
        out["accel"] = _accel
    return out
