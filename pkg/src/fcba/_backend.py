"""Select the compiled kernel when available, else the pure-Python one.

Set ``FCBA_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernel_py

if os.environ.get("FCBA_PURE_PYTHON"):
    evolve = _kernel_py.evolve
    BACKEND = "python"
else:
    try:
        from ._kernel import evolve
        BACKEND = "compiled"
    except ImportError:
        evolve = _kernel_py.evolve
        BACKEND = "python"

evolve_python = _kernel_py.evolve


def evolve_with(backend: str):
    if backend == "python":
        return _kernel_py.evolve
    if backend == "compiled":
        from ._kernel import evolve as compiled
        return compiled
    raise ValueError(f"unknown backend {backend!r}")
