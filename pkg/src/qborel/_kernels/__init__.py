"""Hot-kernel backend selection: compiled extension if present, else Python.

Build the extension in place with ``python setup.py build_ext --inplace``
(optional; everything works on the fallback).  ``benchmarks/bench_kernels.py``
compares the two.
"""

try:
    from ._walk import BACKEND, windowed_walk  # noqa: F401
except ImportError:  # pragma: no cover - depends on build environment
    from ._walk_py import BACKEND, windowed_walk  # noqa: F401

__all__ = ["BACKEND", "windowed_walk"]
