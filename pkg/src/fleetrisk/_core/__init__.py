"""Numeric core with compiled/pure backend selection.

The Cython extension is preferred when built; set ``FLEETRISK_PURE=1`` to
force the pure-Python fallback.  ``BACKEND`` names the active choice.
"""

import os

from . import pure

LINEAR = pure.LINEAR
RBF = pure.RBF
SIGMOID = pure.SIGMOID

if os.environ.get("FLEETRISK_PURE", "") not in ("", "0"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

kernel_value = _impl.kernel_value
gram_matrix = _impl.gram_matrix
kernel_row = _impl.kernel_row
smo_solve = _impl.smo_solve
