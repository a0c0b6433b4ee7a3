"""Hot-kernel backend selection.

The Matern correlation kernel exists twice: a Cython extension
(``_matern_c``) built at install time and a pure-Python fallback
(``_matern_py``). The compiled version is preferred; set the environment
variable ``PCVCM_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and the cross-implementation tests).
"""

import os

if os.environ.get("PCVCM_PURE_PYTHON", "") not in ("", "0"):
    from . import _matern_py as _impl
else:
    try:
        from . import _matern_c as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _matern_py as _impl

BACKEND = _impl.BACKEND_NAME
matern_scalar = _impl.matern_scalar
matern_many = _impl.matern_many

__all__ = ["BACKEND", "matern_scalar", "matern_many"]
