"""Select the compiled ℓ_p kernel when it is importable, else the NumPy fallback.

Set ``LINFEST_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _lpkernel_py

BACKEND = "python"
if os.environ.get("LINFEST_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _lpkernel as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        BACKEND = "cython"
else:
    _compiled = None

lp_minimize = _compiled.lp_minimize if _compiled is not None else _lpkernel_py.lp_minimize
lp_minimize_python = _lpkernel_py.lp_minimize
lp_minimize_compiled = _compiled.lp_minimize if _compiled is not None else None
