"""Kernel backend selection.

Two interchangeable backends implement the hot patch kernels (windowed kNN
scan, group gather, scatter-add):

* ``compiled`` -- the Cython extension ``gsrc.kernels._core``;
* ``numpy`` -- the pure-Python fallback ``gsrc.kernels._numpy``.

The compiled backend is preferred when the extension was built; otherwise
the fallback is selected silently. Set the environment variable
``GSRC_KERNELS=numpy`` (or ``compiled``) before import to force a backend,
or call :func:`set_backend` at runtime.
"""

import os

from . import _numpy

try:
    from . import _core
except ImportError:
    _core = None

_BACKENDS = {"numpy": _numpy}
if _core is not None:
    _BACKENDS["compiled"] = _core


def _resolve(name):
    if name == "auto":
        return "compiled" if _core is not None else "numpy"
    if name not in _BACKENDS:
        known = ", ".join(sorted(_BACKENDS) | {"auto"})
        raise ValueError(f"unknown kernel backend {name!r} (available: {known})")
    return name


_active = _resolve(os.environ.get("GSRC_KERNELS", "auto").strip().lower() or "auto")


def available_backends():
    """Names of the backends importable in this environment."""
    return sorted(_BACKENDS)


def active_backend():
    """Name of the backend currently dispatched to."""
    return _active


def set_backend(name):
    """Select the kernel backend ('numpy', 'compiled' or 'auto')."""
    global _active
    _active = _resolve(name)


def get_module(name="auto"):
    """Return a backend module directly (used by the benchmark script)."""
    return _BACKENDS[_resolve(name)]


def knn_batch(target, ex_rows, ex_cols, b_side, window, k):
    return _BACKENDS[_active].knn_batch(target, ex_rows, ex_cols, b_side, window, k)


def gather_groups(source, rows, cols, b_side):
    return _BACKENDS[_active].gather_groups(source, rows, cols, b_side)


def scatter_groups(vals, cnts, rows, cols, b_side, patches):
    return _BACKENDS[_active].scatter_groups(vals, cnts, rows, cols, b_side, patches)
