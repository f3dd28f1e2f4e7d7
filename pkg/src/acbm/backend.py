"""Kernel backend selection: compiled extension if built, else pure Python.

Both backends implement ``run_chain_kernel`` with identical semantics and
RNG stream, so results do not depend on which one is active. Override the
default with the ACBM_BACKEND environment variable ("c" or "python").
"""

import os

from . import _kernel_py

try:
    from . import _kernel as _kernel_c
except ImportError:  # extension not built
    _kernel_c = None

HAVE_COMPILED = _kernel_c is not None
DEFAULT_BACKEND = "c" if HAVE_COMPILED else "python"


def available_backends():
    return ("c", "python") if HAVE_COMPILED else ("python",)


def get_backend(name=None):
    """Resolve a backend module by name; None picks the environment override
    or the best available."""
    if name is None:
        name = os.environ.get("ACBM_BACKEND") or DEFAULT_BACKEND
    name = name.lower()
    if name in ("c", "compiled", "cython"):
        if _kernel_c is None:
            raise RuntimeError("compiled kernel not available; build with `pip install -e .`")
        return _kernel_c
    if name in ("python", "py", "fallback"):
        return _kernel_py
    raise ValueError(f"unknown backend {name!r}")


def backend_name(module) -> str:
    return "python" if module is _kernel_py else "c"
