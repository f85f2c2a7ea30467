"""Filter kernel selection: compiled extension when available, NumPy otherwise.

Set CONSENT_AUDIT_PURE_PY=1 to force the NumPy path (the benchmark uses this
to compare the two).
"""

from __future__ import annotations

import os

BACKEND = "python"

if os.environ.get("CONSENT_AUDIT_PURE_PY"):
    from ._filter_py import kalman_filter_parts
else:
    try:
        from ._filter_cy import kalman_filter_parts  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built; correctness is unaffected
        from ._filter_py import kalman_filter_parts  # type: ignore[no-redef]

__all__ = ["kalman_filter_parts", "BACKEND"]
