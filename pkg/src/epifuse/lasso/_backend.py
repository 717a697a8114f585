"""Import-time selection of the coordinate-descent kernel.

Prefers the compiled Cython extension; falls back to the pure-numpy twin so
the package works from a plain source checkout. ``benchmarks/bench_cd.py``
compares the two.
"""

try:
    from ._cd_fast import solve_cd

    KERNEL_BACKEND = "cython"
except ImportError:  # extension not built
    from ._cd_py import solve_cd

    KERNEL_BACKEND = "python"

__all__ = ["solve_cd", "KERNEL_BACKEND"]
