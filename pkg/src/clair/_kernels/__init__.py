"""Backend dispatch for the numerical hot loops.

Two interchangeable implementations exist: a numba-compiled one and a pure
numpy fallback. The env var CLAIR_BACKEND selects one explicitly ("numba" or
"numpy"); unset, numba is used when importable. ``benchmarks/bench_solver.py``
compares the two.
"""

from __future__ import annotations

import os

from ..exceptions import ConfigError

_CACHE: dict[str, object] = {}


def _load(name: str):
    if name not in _CACHE:
        if name == "numpy":
            from . import numpy_impl as mod
        elif name == "numba":
            try:
                from . import numba_impl as mod
            except ImportError as exc:
                raise ConfigError(
                    "CLAIR_BACKEND=numba requested but numba is not importable"
                ) from exc
        else:
            raise ConfigError(f"unknown kernel backend {name!r}")
        _CACHE[name] = mod
    return _CACHE[name]


def default_backend() -> str:
    """Backend name resolved from CLAIR_BACKEND, or auto-detected."""
    env = os.environ.get("CLAIR_BACKEND", "").strip().lower()
    if env in ("numpy", "numba"):
        return env
    if env:
        raise ConfigError(f"CLAIR_BACKEND must be 'numpy' or 'numba', got {env!r}")
    try:
        import numba  # noqa: F401

        return "numba"
    except ImportError:
        return "numpy"


def get_kernels(backend: str | None = None):
    """Kernel module for ``backend``, or for the default backend."""
    return _load(backend or default_backend())
