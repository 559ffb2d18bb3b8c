"""Build script for the optional compiled kernels.

The Cython extension ``regmg._core`` is optional: if it cannot be compiled
the package falls back to the numpy kernels in ``regmg._kernels``.
"""
import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

compiler_directives = {
    "language_level": 3,
    "boundscheck": False,
    "wraparound": False,
    "cdivision": True,
    "nonecheck": False,
    "initializedcheck": False,
}

ext_modules = []
if cythonize is not None and not os.environ.get("REGMG_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "regmg._core",
                ["src/regmg/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives=compiler_directives,
    )

setup(ext_modules=ext_modules)
