"""Build the optional compiled kernel.

The package works without it: if Cython or a C compiler is unavailable the
extension is skipped and ``lqgibbs.kernels`` falls back to pure Python.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("LQGIBBS_NO_EXTENSION"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "lqgibbs._kernels",
                    ["src/lqgibbs/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
