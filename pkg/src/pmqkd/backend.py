"""Simulation kernel selection.

The compiled Cython kernel is preferred when its extension module is
importable; otherwise the vectorized NumPy implementation is used.
Both consume identical uniform-variate blocks, so results do not
depend on which one is active.
"""
from __future__ import annotations

from . import _mckernel_np

try:
    from . import _mckernel  # compiled extension, optional

    HAVE_COMPILED = True
except ImportError:
    _mckernel = None
    HAVE_COMPILED = False

_BACKENDS = {"numpy": _mckernel_np}
if HAVE_COMPILED:
    _BACKENDS["compiled"] = _mckernel

_active_name = "compiled" if HAVE_COMPILED else "numpy"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return _active_name


def set_backend(name: str) -> None:
    """Select the kernel implementation (mainly for tests/benchmarks)."""
    global _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active_name = name


def simulate_block(*args, **kwargs) -> None:
    _BACKENDS[_active_name].simulate_block(*args, **kwargs)
