"""Build script for the optional compiled coordinate-descent kernel.

The package works without the extension (a pure-numpy kernel is selected at
import time), so the build degrades gracefully when Cython or a C compiler
is unavailable.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("epifuse.lasso._cd_fast", ["src/epifuse/lasso/_cd_fast.pyx"])],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )

setup(ext_modules=ext_modules)
